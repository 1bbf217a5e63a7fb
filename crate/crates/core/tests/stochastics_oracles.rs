use basket_aad::stochastics::{
    inverse_normal_cdf, marginal_inverse, marginal_pdf, normal_cdf, normal_pdf,
    sample_standard_normals, ExponentialMarginal, RngStream,
};

#[allow(clippy::excessive_precision)]
/// Phi(x) computed with mpmath at 40 significant digits.
const CDF_REFERENCE: [(f64, f64); 14] = [
    (-37.5, 4.6053530095819548438e-308),
    (-20.0, 2.7536241186062336951e-89),
    (-8.0, 6.2209605742717841235e-16),
    (-5.0, 2.8665157187919391167e-7),
    (-3.0, 0.0013498980316300945267),
    (-1.5, 0.066807201268858066004),
    (-0.5, 0.30853753872598689636),
    (-0.001, 0.49960105778608893741),
    (0.25, 0.59870632568292372424),
    (1.0, 0.84134474606854294859),
    (2.5, 0.99379033467422386483),
    (4.0, 0.99996832875816688008),
    (7.0, 0.99999999999872018746),
    (8.2, 0.99999999999999987981),
];

#[test]
fn cdf_matches_high_precision_reference() {
    for (x, p) in CDF_REFERENCE {
        let got = normal_cdf(x);
        assert!((got - p).abs() <= 1e-15, "x={x}: {got} vs {p}");
        if x < 0.0 {
            assert!(
                (got - p).abs() <= 1e-13 * p,
                "relative accuracy in the lower tail at x={x}"
            );
        }
    }
}

#[test]
fn pdf_is_derivative_of_cdf() {
    let h = 1e-5;
    for k in -60..=60 {
        let x = k as f64 * 0.1;
        let fd = (normal_cdf(x + h) - normal_cdf(x - h)) / (2.0 * h);
        assert!((fd - normal_pdf(x)).abs() <= 1e-9, "x={x}");
    }
}

#[test]
fn inverse_cdf_accuracy_and_monotonicity() {
    let grid = 10_000;
    let mut prev = f64::NEG_INFINITY;
    for k in 1..grid {
        let u = k as f64 / grid as f64;
        let x = inverse_normal_cdf(u).unwrap();
        assert!(x > prev, "not increasing at u={u}");
        prev = x;
        assert!((normal_cdf(x) - u).abs() <= 1e-9, "u={u}");
    }
    for u in [
        1e-300,
        1e-100,
        1e-20,
        1e-10,
        1e-5,
        0.02425,
        0.97575,
        1.0 - 1e-10,
        1.0 - 1e-15,
    ] {
        let x = inverse_normal_cdf(u).unwrap();
        assert!(
            (normal_cdf(x) - u).abs() <= 1e-9 * u.clamp(1e-300, 1.0),
            "u={u}"
        );
    }
}

#[test]
fn inverse_cdf_round_trip() {
    for k in 0..=1200 {
        let x = -6.0 + k as f64 * 0.01;
        let back = inverse_normal_cdf(normal_cdf(x)).unwrap();
        assert!((back - x).abs() <= 1e-8, "x={x}: {back}");
    }
}

#[test]
fn normal_draws_have_unit_moments() {
    let draws = sample_standard_normals(RngStream::new(2024, 0), 1_000_000);
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() <= 0.004, "mean {mean}");
    assert!((var - 1.0).abs() <= 0.006, "variance {var}");
}

#[test]
fn marginal_round_trip_and_density() {
    for hazard in [0.001, 0.01, 0.05, 0.5, 3.0] {
        let m = ExponentialMarginal::new(hazard).unwrap();
        for k in 1..1000 {
            let u = k as f64 / 1000.0;
            let t = marginal_inverse(&m, u).unwrap();
            assert!((m.cdf(t) - u).abs() <= 1e-12, "hazard={hazard} u={u}");
        }
        let scale = 1.0 / hazard;
        for k in 0..50 {
            let t = scale * (0.05 + k as f64 * 0.1);
            let h = 1e-4 * scale;
            let fd = (m.cdf(t + h) - m.cdf(t - h)) / (2.0 * h);
            let pdf = marginal_pdf(&m, t);
            assert!((fd - pdf).abs() <= 1e-6 * pdf, "hazard={hazard} t={t}");
        }
    }
}
