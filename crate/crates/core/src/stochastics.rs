//! Random normals, the standard normal distribution and exponential
//! default-time marginals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A counter-based normal stream keyed by `(seed, stream_id)`.
///
/// Each Monte Carlo path owns the stream whose id is its path index, so the
/// draws for a path do not depend on how paths are distributed over workers
/// and repeated runs (including bumped revaluations) see identical numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// Fills `out` with independent standard normals.
    pub fn fill_normals(&self, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }
}

pub fn sample_standard_normals(stream: RngStream, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    stream.fill_normals(&mut out);
    out
}

/// Standard normal cumulative distribution function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Inverse of [`normal_cdf`] on `(0, 1)`.
///
/// Acklam's rational approximation (relative error below 1.15e-9) followed
/// by one Halley step against the erfc-based CDF, which brings the result to
/// near machine precision.
pub fn inverse_normal_cdf(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::DomainError { value: u });
    }
    // Published coefficients, kept verbatim.
    #[allow(clippy::excessive_precision)]
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if u < P_LOW {
        tail((-2.0 * u.ln()).sqrt())
    } else if u > 1.0 - P_LOW {
        -tail((-2.0 * (-u).ln_1p()).sqrt())
    } else {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    // Halley refinement; work with the upper tail above the median so the
    // residual does not cancel.
    let e = if u <= 0.5 {
        normal_cdf(x) - u
    } else {
        (1.0 - u) - normal_cdf(-x)
    };
    let step = e / normal_pdf(x);
    Ok(x - step / (1.0 + 0.5 * x * step))
}

/// Exponential default-time marginal `M(t) = 1 - exp(-hazard * t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialMarginal {
    hazard: f64,
}

impl ExponentialMarginal {
    pub fn new(hazard: f64) -> Result<Self> {
        if !(hazard > 0.0 && hazard.is_finite()) {
            return Err(Error::NonPositiveHazard { value: hazard });
        }
        Ok(ExponentialMarginal { hazard })
    }

    #[inline]
    pub fn hazard(&self) -> f64 {
        self.hazard
    }

    #[inline]
    pub fn cdf(&self, t: f64) -> f64 {
        -(-self.hazard * t).exp_m1()
    }

    /// `M^{-1}(u) = -ln(1 - u) / hazard`.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::DomainError { value: u });
        }
        Ok(self.inverse_unchecked(u))
    }

    #[inline]
    pub(crate) fn inverse_unchecked(&self, u: f64) -> f64 {
        -(-u).ln_1p() / self.hazard
    }

    /// Density `hazard * exp(-hazard * t)`.
    #[inline]
    pub fn pdf(&self, t: f64) -> f64 {
        self.hazard * (-self.hazard * t).exp()
    }
}

pub fn marginal_inverse(m: &ExponentialMarginal, u: f64) -> Result<f64> {
    m.inverse(u)
}

pub fn marginal_pdf(m: &ExponentialMarginal, t: f64) -> f64 {
    m.pdf(t)
}
