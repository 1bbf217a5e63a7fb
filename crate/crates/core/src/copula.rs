//! Per-path Gaussian copula sampling with a tape, its adjoint sweep and the
//! forward-mode path sensitivity.

use crate::corelin::{CholeskyFactor, LowerTriangularSeed};
use crate::error::{Error, Result};
use crate::stochastics::{normal_cdf, normal_pdf, ExponentialMarginal, RngStream};

/// Uniforms are kept in `[U_CLAMP, 1 - U_CLAMP]` so default times stay finite.
pub const U_CLAMP: f64 = 1e-16;

/// Intermediate values of one path's forward sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTape {
    /// Independent normals.
    pub z_tilde: Vec<f64>,
    /// Correlated normals `C z_tilde`.
    pub z: Vec<f64>,
    /// `Phi(z)`.
    pub u: Vec<f64>,
    /// Default times `M^{-1}(u)`.
    pub x: Vec<f64>,
}

impl PathTape {
    pub fn new(n: usize) -> Self {
        PathTape {
            z_tilde: vec![0.0; n],
            z: vec![0.0; n],
            u: vec![0.0; n],
            x: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// Adjoints of one path: `x_bar = dP/dX`, `u_bar`, `z_bar` and the
/// lower-triangular `c_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAdjoint {
    pub x_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub z_bar: Vec<f64>,
    pub c_bar: LowerTriangularSeed,
}

fn check_dims(c: &CholeskyFactor, marginals: &[ExponentialMarginal]) -> Result<()> {
    if marginals.len() != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.dim(),
            got: marginals.len(),
        });
    }
    Ok(())
}

pub fn simulate_path(
    c: &CholeskyFactor,
    marginals: &[ExponentialMarginal],
    stream: RngStream,
) -> Result<PathTape> {
    check_dims(c, marginals)?;
    let mut tape = PathTape::new(c.dim());
    simulate_path_into(c, marginals, stream, &mut tape);
    Ok(tape)
}

/// Overwrites `tape` with the path for `stream` and returns how many
/// uniforms had to be clamped.
pub fn simulate_path_into(
    c: &CholeskyFactor,
    marginals: &[ExponentialMarginal],
    stream: RngStream,
    tape: &mut PathTape,
) -> usize {
    stream.fill_normals(&mut tape.z_tilde);
    c.mul_vec_into(&tape.z_tilde, &mut tape.z);
    let mut clamped = 0;
    #[allow(clippy::needless_range_loop)]
    for k in 0..tape.z.len() {
        // Work with the survival probability 1 - u = Phi(-z) so that
        // -ln(1 - u) keeps full precision in the upper tail.
        let mut survival = normal_cdf(-tape.z[k]);
        if !(U_CLAMP..=1.0 - U_CLAMP).contains(&survival) {
            survival = survival.clamp(U_CLAMP, 1.0 - U_CLAMP);
            clamped += 1;
        }
        tape.u[k] = 1.0 - survival;
        tape.x[k] = -survival.ln() / marginals[k].hazard();
    }
    clamped
}

pub fn adjoint_sweep(
    tape: &PathTape,
    marginals: &[ExponentialMarginal],
    x_bar: &[f64],
) -> Result<PathAdjoint> {
    let n = tape.dim();
    if x_bar.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x_bar.len(),
        });
    }
    if marginals.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: marginals.len(),
        });
    }
    let mut u_bar = vec![0.0; n];
    let mut z_bar = vec![0.0; n];
    propagate_to_z_bar(tape, marginals, x_bar, &mut u_bar, &mut z_bar);
    let mut c_bar = LowerTriangularSeed::zeros(n);
    c_bar.add_lower_outer(&z_bar, &tape.z_tilde);
    Ok(PathAdjoint {
        x_bar: x_bar.to_vec(),
        u_bar,
        z_bar,
        c_bar,
    })
}

/// Backward sweep that adds this path's `c_bar` into `c_bar_sum` instead of
/// materialising it. Rows with a zero `z_bar` are skipped.
pub fn adjoint_sweep_accumulate(
    tape: &PathTape,
    marginals: &[ExponentialMarginal],
    x_bar: &[f64],
    scratch: &mut AdjointScratch,
    c_bar_sum: &mut LowerTriangularSeed,
) {
    propagate_to_z_bar(
        tape,
        marginals,
        x_bar,
        &mut scratch.u_bar,
        &mut scratch.z_bar,
    );
    c_bar_sum.add_lower_outer(&scratch.z_bar, &tape.z_tilde);
}

/// Reusable buffers for [`adjoint_sweep_accumulate`].
#[derive(Debug, Clone)]
pub struct AdjointScratch {
    u_bar: Vec<f64>,
    z_bar: Vec<f64>,
}

impl AdjointScratch {
    pub fn new(n: usize) -> Self {
        AdjointScratch {
            u_bar: vec![0.0; n],
            z_bar: vec![0.0; n],
        }
    }
}

#[inline]
fn propagate_to_z_bar(
    tape: &PathTape,
    marginals: &[ExponentialMarginal],
    x_bar: &[f64],
    u_bar: &mut [f64],
    z_bar: &mut [f64],
) {
    for k in 0..x_bar.len() {
        if x_bar[k] == 0.0 {
            u_bar[k] = 0.0;
            z_bar[k] = 0.0;
            continue;
        }
        u_bar[k] = x_bar[k] / marginals[k].pdf(tape.x[k]);
        z_bar[k] = u_bar[k] * normal_pdf(tape.z[k]);
    }
}

/// Tangent of the default times, `X_dot`, for a factor tangent `c_dot`.
pub fn forward_path_sensitivity(
    tape: &PathTape,
    marginals: &[ExponentialMarginal],
    c_dot: &LowerTriangularSeed,
) -> Result<Vec<f64>> {
    let n = tape.dim();
    if c_dot.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c_dot.dim(),
        });
    }
    if marginals.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: marginals.len(),
        });
    }
    let mut x_dot = vec![0.0; n];
    forward_path_sensitivity_into(tape, marginals, c_dot, &mut x_dot);
    Ok(x_dot)
}

pub(crate) fn forward_path_sensitivity_into(
    tape: &PathTape,
    marginals: &[ExponentialMarginal],
    c_dot: &LowerTriangularSeed,
    x_dot: &mut [f64],
) {
    for k in 0..x_dot.len() {
        let z_dot = crate::corelin::dot(c_dot.row(k), &tape.z_tilde[..=k]);
        let u_dot = normal_pdf(tape.z[k]) * z_dot;
        x_dot[k] = u_dot / marginals[k].pdf(tape.x[k]);
    }
}
