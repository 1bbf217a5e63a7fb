//! Cholesky tangent and adjoint checked against central finite differences
//! of the factorization and against each other.

use basket_aad::corelin::{
    bump_pair, cholesky_adjoint, cholesky_adjoint_counted, cholesky_factorize,
    cholesky_factorize_counted, cholesky_tangent, random_correlation, CholeskyFactor,
    CorrelationMatrix, LowerTriangularSeed, Pair,
};
use basket_aad::stochastics::{sample_standard_normals, RngStream};
use proptest::prelude::*;

const FD_STEP: f64 = 1e-6;

/// Central difference of the factorization along one pair.
fn fd_tangent(rho: &CorrelationMatrix, pair: Pair) -> LowerTriangularSeed {
    let up = cholesky_factorize(&bump_pair(rho, pair, FD_STEP).unwrap()).unwrap();
    let down = cholesky_factorize(&bump_pair(rho, pair, -FD_STEP).unwrap()).unwrap();
    LowerTriangularSeed::from_fn(rho.dim(), |i, j| {
        (up.get(i, j) - down.get(i, j)) / (2.0 * FD_STEP)
    })
}

fn max_abs(s: &LowerTriangularSeed) -> f64 {
    let n = s.dim();
    (0..n)
        .flat_map(|i| (0..=i).map(move |j| (i, j)))
        .map(|(i, j)| s.get(i, j).abs())
        .fold(0.0, f64::max)
}

fn random_seed_matrix(n: usize, seed: u64) -> LowerTriangularSeed {
    let v = sample_standard_normals(RngStream::new(seed, 1), n * n);
    LowerTriangularSeed::from_fn(n, |i, j| v[i * n + j])
}

#[test]
fn reconstruction_of_random_matrices() {
    for n in [1, 2, 5, 10, 20, 40] {
        for seed in 0..20 {
            let rho = random_correlation(n, seed).unwrap();
            let c = cholesky_factorize(&rho).unwrap();
            assert!(c.reconstruction_error(&rho) <= 1e-12, "n={n} seed={seed}");
            for i in 0..n {
                assert!(c.get(i, i) > 0.0);
                for j in i + 1..n {
                    assert_eq!(c.get(i, j), 0.0);
                }
            }
        }
    }
}

#[test]
fn tangent_matches_finite_differences() {
    for n in [2, 5, 10, 20] {
        for seed in 0..100 {
            let rho = random_correlation(n, 1000 + seed).unwrap();
            let c = cholesky_factorize(&rho).unwrap();
            for pair in Pair::all(n) {
                let exact = cholesky_tangent(&c, pair).unwrap();
                let fd = fd_tangent(&rho, pair);
                let mut diff = fd.clone();
                diff.add_scaled(-1.0, &exact);
                let rel = max_abs(&diff) / max_abs(&exact).max(1e-300);
                assert!(rel <= 1e-6, "n={n} seed={seed} pair={pair:?} rel={rel:e}");
            }
        }
    }
}

#[test]
fn forward_reverse_duality() {
    for n in [2, 5, 10, 20] {
        for seed in 0..25 {
            let rho = random_correlation(n, 5000 + seed).unwrap();
            let c = cholesky_factorize(&rho).unwrap();
            let cbar = random_seed_matrix(n, seed);
            let adj = cholesky_adjoint(&c, &cbar).unwrap();
            let scale = adj.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for pair in Pair::all(n) {
                let fwd = cbar.dot(&cholesky_tangent(&c, pair).unwrap());
                let rel = (fwd - adj.get(pair)).abs() / scale;
                assert!(rel <= 1e-10, "n={n} seed={seed} pair={pair:?} rel={rel:e}");
            }
        }
    }
}

#[test]
fn adjoint_cost_is_bounded_by_factorization() {
    for n in [2, 5, 10, 20, 40, 64] {
        let rho = random_correlation(n, 7).unwrap();
        let (c, fact_ops) = cholesky_factorize_counted(&rho).unwrap();
        let (_, adj_ops) = cholesky_adjoint_counted(&c, &random_seed_matrix(n, 3)).unwrap();
        let ratio = adj_ops.0 as f64 / fact_ops.0 as f64;
        assert!(ratio <= 3.0, "n={n}: adjoint/factorization = {ratio}");
        if n >= 20 {
            // The inner loops do twice the multiply-adds of the factorization.
            assert!(ratio > 1.5, "n={n}: ratio {ratio}");
        }
    }
}

fn factor_for(n: usize, seed: u64) -> CholeskyFactor {
    cholesky_factorize(&random_correlation(n, seed).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_is_linear_in_the_seed(n in 2usize..12, seed in 0u64..10_000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let c = factor_for(n, seed);
        let s1 = random_seed_matrix(n, seed + 1);
        let s2 = random_seed_matrix(n, seed + 2);
        let mut combo = s1.clone();
        combo.scale(alpha);
        combo.add_scaled(beta, &s2);
        let lhs = cholesky_adjoint(&c, &combo).unwrap();
        let g1 = cholesky_adjoint(&c, &s1).unwrap();
        let g2 = cholesky_adjoint(&c, &s2).unwrap();
        let scale = g1.as_slice().iter().chain(g2.as_slice()).fold(1e-300f64, |m, v| m.max(v.abs()))
            * (alpha.abs() + beta.abs()).max(1e-3);
        for pair in Pair::all(n) {
            let rhs = alpha * g1.get(pair) + beta * g2.get(pair);
            prop_assert!((lhs.get(pair) - rhs).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn equicorrelated_matrices_reconstruct(n in 1usize..30, rho in -0.02f64..0.99) {
        let m = CorrelationMatrix::constant(n, rho);
        // Negative equicorrelation is only PSD down to -1/(n-1).
        prop_assume!(m.is_ok());
        let m = m.unwrap();
        let c = cholesky_factorize(&m).unwrap();
        prop_assert!(c.reconstruction_error(&m) <= 1e-12);
    }
}
