//! Dense correlation-matrix linear algebra.
//!
//! The Cholesky factorization `rho = C C^T` together with its tangent
//! (forward-mode) and adjoint (reverse-mode) derivatives with respect to the
//! strictly-lower correlation entries. All matrices are stored densely in
//! row-major order; the factorization reads only the lower triangle of `rho`,
//! so `rho[i][j]` and `rho[j][i]` behave as a single parameter.

use crate::error::{Error, Result};

/// Pivots in `[-PIVOT_TOLERANCE, 0]` are clamped to zero; anything below is
/// rejected as not positive semidefinite.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Smallest Cholesky diagonal entry through which derivatives are taken.
pub const MIN_DERIVATIVE_PIVOT: f64 = 1e-14;

const DIAGONAL_TOLERANCE: f64 = 1e-12;

/// A strictly-lower index pair `(i, j)` with `i > j`, zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
}

impl Pair {
    pub fn new(i: usize, j: usize, n: usize) -> Result<Self> {
        if i <= j || i >= n {
            return Err(Error::InvalidPair { i, j, n });
        }
        Ok(Pair { i, j })
    }

    /// Position of the pair in the packed strictly-lower ordering
    /// `(1,0), (2,0), (2,1), (3,0), ...`.
    #[inline]
    pub fn packed_index(self) -> usize {
        self.i * (self.i - 1) / 2 + self.j
    }

    /// Every strictly-lower pair of an `n`-dimensional matrix in packed order.
    pub fn all(n: usize) -> impl Iterator<Item = Pair> {
        (1..n).flat_map(|i| (0..i).map(move |j| Pair { i, j }))
    }

    pub fn count(n: usize) -> usize {
        n * n.saturating_sub(1) / 2
    }
}

/// A validated correlation matrix: symmetric, unit diagonal, entries in
/// `[-1, 1]` and positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        CorrelationMatrix { n, entries }
    }

    /// Equicorrelated matrix with every off-diagonal entry equal to `rho`.
    pub fn constant(n: usize, rho: f64) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { rho }).collect())
            .collect();
        validate_correlation(&rows)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.n.max(1))
            .take(self.n)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// Validates a square matrix as a correlation matrix. Only the lower
/// triangle (including the diagonal) is read; the upper triangle is
/// mirrored from it.
pub fn validate_correlation(m: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    let n = m.len();
    for (row, r) in m.iter().enumerate() {
        if r.len() != n {
            return Err(Error::NotSquare {
                rows: n,
                row,
                cols: r.len(),
            });
        }
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let d = m[i][i];
        if !((d - 1.0).abs() <= DIAGONAL_TOLERANCE) {
            return Err(Error::DiagonalNotOne { index: i, value: d });
        }
        entries[i * n + i] = 1.0;
        for j in 0..i {
            let v = m[i][j];
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::EntryOutOfRange { i, j, value: v });
            }
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    let rho = CorrelationMatrix { n, entries };
    factorize(&rho, &mut 0)?;
    Ok(rho)
}

/// Lower-triangular `C` with `C C^T = rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    n: usize,
    entries: Vec<f64>,
}

impl CholeskyFactor {
    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Row `i` restricted to its lower part, `C[i][0..=i]`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..i * self.n + i + 1]
    }

    /// `out = C x`, touching only the lower triangle.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), &x[..=i]);
        }
    }

    /// Fails with [`Error::SingularPivot`] unless every diagonal entry is
    /// large enough to differentiate through.
    pub fn check_strictly_positive(&self) -> Result<()> {
        for i in 0..self.n {
            let d = self.get(i, i);
            if !(d > MIN_DERIVATIVE_PIVOT) {
                return Err(Error::SingularPivot { index: i, value: d });
            }
        }
        Ok(())
    }

    /// Max-norm distance between `C C^T` and `rho`.
    pub fn reconstruction_error(&self, rho: &CorrelationMatrix) -> f64 {
        let n = self.n;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.row(i)[..=j], &self.row(j)[..=j]);
                worst = worst.max((v - rho.get(i, j)).abs());
            }
        }
        worst
    }
}

/// Lower-triangular matrix of adjoint (or tangent) weights on the entries of
/// a Cholesky factor. The strictly upper part is never stored to.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangularSeed {
    n: usize,
    entries: Vec<f64>,
}

impl LowerTriangularSeed {
    pub fn zeros(n: usize) -> Self {
        LowerTriangularSeed {
            n,
            entries: vec![0.0; n * n],
        }
    }

    /// Builds a seed from `f(i, j)` evaluated on the lower triangle.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                s.entries[i * n + j] = f(i, j);
            }
        }
        s
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// # Panics
    /// If `j > i`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(j <= i, "seed entries live on the lower triangle");
        self.entries[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..i * self.n + i + 1]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.entries[i * self.n..i * self.n + i + 1]
    }

    pub fn fill_zero(&mut self) {
        self.entries.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Frobenius inner product over the lower triangle.
    pub fn dot(&self, other: &LowerTriangularSeed) -> f64 {
        assert_eq!(self.n, other.n);
        (0..self.n).map(|i| dot(self.row(i), other.row(i))).sum()
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &LowerTriangularSeed) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.entries.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `self[i][j] += u[i] * v[j]` for `i >= j`, skipping rows where `u[i]`
    /// is exactly zero.
    pub fn add_lower_outer(&mut self, u: &[f64], v: &[f64]) {
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (c, &vj) in self.row_mut(i).iter_mut().zip(v) {
                *c += ui * vj;
            }
        }
    }
}

/// Sensitivities with respect to the `N(N-1)/2` strictly-lower correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationGradient {
    n: usize,
    values: Vec<f64>,
}

impl CorrelationGradient {
    pub fn zeros(n: usize) -> Self {
        CorrelationGradient {
            n,
            values: vec![0.0; Pair::count(n)],
        }
    }

    pub fn from_packed(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != Pair::count(n) {
            return Err(Error::DimensionMismatch {
                expected: Pair::count(n),
                got: values.len(),
            });
        }
        Ok(CorrelationGradient { n, values })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, pair: Pair) -> f64 {
        self.values[pair.packed_index()]
    }

    #[inline]
    pub fn set(&mut self, pair: Pair, v: f64) {
        self.values[pair.packed_index()] = v;
    }

    /// Values in packed pair order (see [`Pair::packed_index`]).
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pair, f64)> + '_ {
        Pair::all(self.n).zip(self.values.iter().copied())
    }
}

/// Operation counts (multiply-adds in the inner loops plus one per
/// divide/square root) used to check the cost of the adjoint against the
/// factorization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount(pub u64);

pub fn cholesky_factorize(rho: &CorrelationMatrix) -> Result<CholeskyFactor> {
    factorize(rho, &mut 0)
}

pub fn cholesky_factorize_counted(rho: &CorrelationMatrix) -> Result<(CholeskyFactor, OpCount)> {
    let mut ops = 0;
    let c = factorize(rho, &mut ops)?;
    Ok((c, OpCount(ops)))
}

fn factorize(rho: &CorrelationMatrix, ops: &mut u64) -> Result<CholeskyFactor> {
    let n = rho.n;
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (done, row_i) = c.split_at_mut(i * n);
            let lj: &[f64] = if j == i {
                &row_i[..j]
            } else {
                &done[j * n..j * n + j]
            };
            let s = rho.get(i, j) - dot(&row_i[..j], lj);
            *ops += j as u64 + 1;
            if j == i {
                if s < -PIVOT_TOLERANCE || s.is_nan() {
                    return Err(Error::NotPositiveSemidefinite { index: i, pivot: s });
                }
                row_i[i] = if s > 0.0 { s.sqrt() } else { 0.0 };
            } else {
                let d = done[j * n + j];
                row_i[j] = if d > 0.0 { s / d } else { 0.0 };
            }
        }
    }
    Ok(CholeskyFactor { n, entries: c })
}

/// `dC / d rho[pair]` by forward-mode differentiation of the factorization
/// loop, with `rho[i][j]` and `rho[j][i]` moving together.
pub fn cholesky_tangent(c: &CholeskyFactor, pair: Pair) -> Result<LowerTriangularSeed> {
    let n = c.n;
    if pair.i >= n {
        return Err(Error::InvalidPair {
            i: pair.i,
            j: pair.j,
            n,
        });
    }
    c.check_strictly_positive()?;
    let mut dc = LowerTriangularSeed::zeros(n);
    // Rows above `pair.i` do not depend on the perturbed entry.
    for i in pair.i..n {
        for j in 0..=i {
            let seed = if i == pair.i && j == pair.j { 1.0 } else { 0.0 };
            let ci = c.row(i);
            if j == i {
                let s_dot = seed - 2.0 * dot(&ci[..i], &dc.row(i)[..i]);
                let v = s_dot / (2.0 * ci[i]);
                dc.entries[i * n + i] = v;
            } else {
                let cj = c.row(j);
                let s_dot = seed
                    - dot(&dc.row(i)[..j], &cj[..j])
                    - dot(&ci[..j], &dc.row(j)[..j])
                    - ci[j] * dc.get(j, j);
                dc.entries[i * n + j] = s_dot / cj[j];
            }
        }
    }
    Ok(dc)
}

/// Reverse sweep over the factorization: maps the adjoint `cbar` of the
/// factor entries to the adjoint of the strictly-lower correlations.
pub fn cholesky_adjoint(
    c: &CholeskyFactor,
    cbar: &LowerTriangularSeed,
) -> Result<CorrelationGradient> {
    Ok(adjoint(c, cbar, &mut 0)?.0)
}

pub fn cholesky_adjoint_counted(
    c: &CholeskyFactor,
    cbar: &LowerTriangularSeed,
) -> Result<(CorrelationGradient, OpCount)> {
    let mut ops = 0;
    let (g, _) = adjoint(c, cbar, &mut ops)?;
    Ok((g, OpCount(ops)))
}

/// Returns the strictly-lower gradient and the diagonal adjoints (the
/// latter only used by tests).
fn adjoint(
    c: &CholeskyFactor,
    cbar: &LowerTriangularSeed,
    ops: &mut u64,
) -> Result<(CorrelationGradient, Vec<f64>)> {
    let n = c.n;
    if cbar.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cbar.n,
        });
    }
    c.check_strictly_positive()?;
    let mut bar = cbar.entries.clone();
    let mut grad = CorrelationGradient::zeros(n);
    let mut diag = vec![0.0; n];
    for i in (0..n).rev() {
        let ci = c.row(i);
        // Diagonal: C[i][i] = sqrt(s), s = rho[i][i] - sum_k C[i][k]^2.
        let s_bar = bar[i * n + i] / (2.0 * ci[i]);
        diag[i] = s_bar;
        for k in 0..i {
            bar[i * n + k] -= 2.0 * s_bar * ci[k];
        }
        *ops += i as u64 + 1;
        // Off-diagonal, in reverse: C[i][j] = (rho[i][j] - sum_k C[i][k] C[j][k]) / C[j][j].
        for j in (0..i).rev() {
            let cj = c.row(j);
            let t_bar = bar[i * n + j] / cj[j];
            grad.values[i * (i - 1) / 2 + j] = t_bar;
            bar[j * n + j] -= t_bar * ci[j];
            let (head, tail) = bar.split_at_mut(i * n);
            let bar_i = &mut tail[..j];
            let bar_j = &mut head[j * n..j * n + j];
            for k in 0..j {
                bar_i[k] -= t_bar * cj[k];
                bar_j[k] -= t_bar * ci[k];
            }
            *ops += 2 * j as u64 + 1;
        }
    }
    Ok((grad, diag))
}

/// Adds `h` to `rho[i][j]` and `rho[j][i]` and revalidates.
pub fn bump_pair(rho: &CorrelationMatrix, pair: Pair, h: f64) -> Result<CorrelationMatrix> {
    let n = rho.n;
    if pair.i >= n || pair.i <= pair.j {
        return Err(Error::InvalidPair {
            i: pair.i,
            j: pair.j,
            n,
        });
    }
    let v = rho.get(pair.i, pair.j) + h;
    if !(-1.0..=1.0).contains(&v) {
        return Err(Error::EntryOutOfRange {
            i: pair.i,
            j: pair.j,
            value: v,
        });
    }
    let mut bumped = rho.clone();
    bumped.entries[pair.i * n + pair.j] = v;
    bumped.entries[pair.j * n + pair.i] = v;
    factorize(&bumped, &mut 0)?;
    Ok(bumped)
}

/// Random correlation matrix `D^{-1/2} A A^T D^{-1/2}` with `A` an `n x 2n`
/// matrix of independent standard normals drawn from stream `(seed, 0)` and
/// `D` the diagonal of `A A^T`. The extra columns keep the family well
/// conditioned at small `n`.
pub fn random_correlation(n: usize, seed: u64) -> Result<CorrelationMatrix> {
    let cols = 2 * n;
    let a = crate::stochastics::sample_standard_normals(
        crate::stochastics::RngStream::new(seed, 0),
        n * cols,
    );
    let row = |i: usize| &a[i * cols..(i + 1) * cols];
    let norms: Vec<f64> = (0..n).map(|i| dot(row(i), row(i)).sqrt()).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        (dot(row(i), row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
                    }
                })
                .collect()
        })
        .collect();
    validate_correlation(&rows)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
pub(crate) fn adjoint_with_diagonal(
    c: &CholeskyFactor,
    cbar: &LowerTriangularSeed,
) -> (CorrelationGradient, Vec<f64>) {
    adjoint(c, cbar, &mut 0).unwrap()
}
