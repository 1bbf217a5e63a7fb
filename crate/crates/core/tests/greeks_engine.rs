use basket_aad::corelin::{
    cholesky_adjoint, cholesky_factorize, CorrelationMatrix, LowerTriangularSeed, Pair,
};
use basket_aad::greeks::{combine_bins, price, BinAccumulator, Engine, EngineConfig, Method};
use basket_aad::stochastics::{sample_standard_normals, RngStream};
use basket_aad::{BasketDefaultSwap, Error};

fn portfolio(n: usize, rho: f64, n_paths: usize) -> EngineConfig {
    let contract =
        BasketDefaultSwap::regular(2.min(n), 5.0, 20, 0.0025, vec![0.4; n], 0.03).unwrap();
    EngineConfig::new(
        CorrelationMatrix::constant(n, rho).unwrap(),
        vec![0.02; n],
        contract,
        n_paths,
        1234,
    )
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn zero_legs_price_to_zero() {
    let contract = BasketDefaultSwap::regular(1, 5.0, 20, 0.0, vec![1.0; 3], 0.03).unwrap();
    let cfg = EngineConfig::new(
        CorrelationMatrix::constant(3, 0.5).unwrap(),
        vec![0.05; 3],
        contract,
        2000,
        1,
    );
    let p = price(&cfg).unwrap();
    assert_eq!(p.value, 0.0);
    assert_eq!(p.stderr, 0.0);
    assert_eq!(p.n_paths, 2000);
}

#[test]
fn single_name_price_matches_default_probability() {
    let (lambda, recovery, maturity) = (0.05, 0.35, 5.0);
    let contract = BasketDefaultSwap::regular(1, maturity, 4, 0.0, vec![recovery], 0.0).unwrap();
    let cfg = EngineConfig::new(
        CorrelationMatrix::identity(1),
        vec![lambda],
        contract,
        100_000,
        99,
    );
    let p = price(&cfg).unwrap();
    let exact = (1.0 - recovery) * (1.0 - f64::exp(-lambda * maturity));
    assert!(
        (p.value - exact).abs() <= 4.0 * p.stderr,
        "{} ± {} vs {exact}",
        p.value,
        p.stderr
    );
}

#[test]
fn estimators_agree() {
    let cfg = portfolio(5, 0.3, 10_000);
    let engine = Engine::new(&cfg).unwrap();
    let fwd = engine.greeks(Method::Forward).unwrap();
    let per_path = engine.greeks(Method::AadPerPath).unwrap();
    let binned = engine.greeks(Method::AadBinned).unwrap();
    let bump = engine.greeks(Method::Bump).unwrap();
    for pair in Pair::all(5) {
        let f = fwd.mean.get(pair);
        assert!(rel(f, per_path.mean.get(pair)) <= 1e-10, "{pair:?}");
        assert!(rel(f, binned.mean.get(pair)) <= 1e-10, "{pair:?}");
        // Forward and per-path adjoint see identical per-path samples.
        assert!(
            rel(
                fwd.stderr().unwrap().get(pair),
                per_path.stderr().unwrap().get(pair)
            ) <= 1e-8
        );
        let sigma = binned
            .stderr()
            .unwrap()
            .get(pair)
            .hypot(bump.stderr().unwrap().get(pair));
        assert!(
            (bump.mean.get(pair) - binned.mean.get(pair)).abs() <= 3.0 * sigma,
            "{pair:?}"
        );
    }
    // All methods report the same sharp price.
    for g in [&per_path, &binned, &bump] {
        assert_eq!(g.price, fwd.price);
    }
    assert_eq!(fwd.price, engine.price());
}

#[test]
fn binning_changes_only_the_error_bars() {
    let mut cfg = portfolio(5, 0.3, 10_000);
    cfg.n_bins = 1;
    let one = Engine::new(&cfg).unwrap().greeks_aad_binned().unwrap();
    assert!(matches!(
        one.stderr(),
        Err(Error::NBinsTooSmall { n_bins: 1 })
    ));
    cfg.n_bins = 20;
    let twenty = Engine::new(&cfg).unwrap().greeks_aad_binned().unwrap();
    cfg.n_bins = 10_000;
    let all = Engine::new(&cfg).unwrap().greeks_aad_binned().unwrap();
    for pair in Pair::all(5) {
        assert!(rel(one.mean.get(pair), twenty.mean.get(pair)) <= 1e-10);
        assert!(rel(one.mean.get(pair), all.mean.get(pair)) <= 1e-10);
        assert!(twenty.stderr().unwrap().get(pair) > 0.0);
        assert!(all.stderr().unwrap().get(pair) > 0.0);
    }
}

#[test]
fn stderr_halves_when_paths_quadruple() {
    let mut cfg = portfolio(5, 0.3, 20_000);
    let small = Engine::new(&cfg).unwrap().greeks_aad_binned().unwrap();
    cfg.n_paths = 80_000;
    let large = Engine::new(&cfg).unwrap().greeks_aad_binned().unwrap();
    let ratios: Vec<f64> = Pair::all(5)
        .map(|p| large.stderr().unwrap().get(p) / small.stderr().unwrap().get(p))
        .collect();
    let avg = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(
        (avg - 0.5).abs() <= 0.15,
        "average stderr ratio {avg} ({ratios:?})"
    );
}

#[test]
fn independent_exchangeable_names_have_exchangeable_greeks() {
    let cfg = portfolio(4, 0.0, 100_000);
    let g = Engine::new(&cfg).unwrap().greeks_aad_binned().unwrap();
    let se = g.stderr().unwrap();
    let pairs: Vec<Pair> = Pair::all(4).collect();
    for a in &pairs {
        for b in &pairs {
            let sigma = se.get(*a).hypot(se.get(*b));
            assert!(
                (g.mean.get(*a) - g.mean.get(*b)).abs() <= 4.0 * sigma,
                "{a:?} vs {b:?}"
            );
        }
    }
}

#[test]
fn two_names_adjoint_matches_bump_at_zero_correlation() {
    let cfg = portfolio(2, 0.0, 100_000);
    let engine = Engine::new(&cfg).unwrap();
    let aad = engine.greeks_aad_binned().unwrap();
    let bump = engine.greeks_bump().unwrap();
    let p = Pair::new(1, 0, 2).unwrap();
    let sigma = aad
        .stderr()
        .unwrap()
        .get(p)
        .hypot(bump.stderr().unwrap().get(p));
    assert!(aad.mean.get(p).signum() == bump.mean.get(p).signum());
    assert!((aad.mean.get(p) - bump.mean.get(p)).abs() <= 3.0 * sigma);
}

#[test]
fn bump_is_first_order_in_h() {
    let mut cfg = portfolio(3, 0.3, 20_000);
    cfg.bump_size = 1e-3;
    let coarse = Engine::new(&cfg).unwrap().greeks_bump().unwrap();
    cfg.bump_size = 1e-4;
    let fine = Engine::new(&cfg).unwrap().greeks_bump().unwrap();
    let exact = Engine::new(&cfg).unwrap().greeks_forward().unwrap();
    for p in Pair::all(3) {
        let e_coarse = (coarse.mean.get(p) - exact.mean.get(p)).abs();
        let e_fine = (fine.mean.get(p) - exact.mean.get(p)).abs();
        // Same random numbers: the residual is the finite-difference bias,
        // which must shrink roughly linearly with h.
        assert!(e_fine <= 0.25 * e_coarse, "{p:?}: {e_fine} vs {e_coarse}");
    }
}

#[test]
fn bump_near_boundary_shrinks_then_fails() {
    let contract = BasketDefaultSwap::regular(1, 5.0, 20, 0.0025, vec![0.4; 2], 0.0).unwrap();
    let near = basket_aad::corelin::validate_correlation(&[vec![1.0, 0.99995], vec![0.99995, 1.0]])
        .unwrap();
    let cfg = EngineConfig::new(near, vec![0.02; 2], contract.clone(), 1000, 5);
    let engine = Engine::new(&cfg).unwrap();
    let base = engine.bump_base();
    let r = engine
        .bump_pair(&base, Pair::new(1, 0, 2).unwrap())
        .unwrap();
    assert!((r.h - 1e-5).abs() < 1e-18);

    let one = basket_aad::corelin::validate_correlation(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let cfg = EngineConfig::new(one, vec![0.02; 2], contract, 1000, 5);
    let engine = Engine::new(&cfg).unwrap();
    assert!(matches!(
        engine.greeks_bump(),
        Err(Error::BumpBreaksPsd { i: 1, j: 0, .. })
    ));
    assert!(matches!(
        engine.greeks_aad_binned(),
        Err(Error::SingularPivot { .. })
    ));
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let cfg = portfolio(5, 0.3, 5_000);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let engine = Engine::new(&cfg).unwrap();
            Method::ALL.map(|m| engine.greeks(m).unwrap())
        })
    };
    let a = run(1);
    let b = run(4);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x, y, "{}", x.method);
        for (u, v) in x.mean.as_slice().iter().zip(y.mean.as_slice()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}

#[test]
fn truncates_paths_to_whole_bins() {
    let mut cfg = portfolio(3, 0.3, 1_005);
    cfg.n_bins = 20;
    let engine = Engine::new(&cfg).unwrap();
    assert_eq!(engine.n_paths(), 1_000);
    let g = engine.greeks_aad_binned().unwrap();
    assert_eq!(g.n_bins, 20);
    assert_eq!(g.price.n_paths, 1_000);

    cfg.n_bins = 0;
    assert!(matches!(Engine::new(&cfg), Err(Error::InvalidConfig(_))));
    cfg.n_bins = 2_000;
    assert!(matches!(Engine::new(&cfg), Err(Error::InvalidConfig(_))));
    cfg.n_bins = 20;
    cfg.hazards.pop();
    assert!(matches!(Engine::new(&cfg), Err(Error::InvalidConfig(_))));
}

fn random_seed(n: usize, id: u64) -> LowerTriangularSeed {
    let v = sample_standard_normals(RngStream::new(3, id), n * n);
    LowerTriangularSeed::from_fn(n, |i, j| v[i * n + j])
}

#[test]
fn combine_bins_two_sample_formulas() {
    let n = 3;
    let c = cholesky_factorize(&CorrelationMatrix::constant(n, 0.2).unwrap()).unwrap();
    let bin = |seed: &LowerTriangularSeed| {
        let mut b = BinAccumulator::new(n);
        b.sum_cbar = seed.clone();
        b.sum_cbar.scale(2.0);
        b.count = 2;
        b
    };
    let (sa, sb) = (random_seed(n, 1), random_seed(n, 2));
    let ga = cholesky_adjoint(&c, &sa).unwrap();
    let gb = cholesky_adjoint(&c, &sb).unwrap();

    let same = combine_bins(&[bin(&sa), bin(&sa), bin(&sa)], &c).unwrap();
    assert!(same
        .stderr()
        .unwrap()
        .as_slice()
        .iter()
        .all(|&s| s <= 1e-15));

    let two = combine_bins(&[bin(&sa), bin(&sb)], &c).unwrap();
    for p in Pair::all(n) {
        let (a, b) = (ga.get(p), gb.get(p));
        assert!((two.mean.get(p) - 0.5 * (a + b)).abs() <= 1e-14);
        assert!((two.stderr().unwrap().get(p) - 0.5 * (a - b).abs()).abs() <= 1e-14);
    }

    let mut odd = bin(&sb);
    odd.count = 3;
    assert!(matches!(
        combine_bins(&[bin(&sa), odd], &c),
        Err(Error::UnequalBins { first: 2, other: 3 })
    ));
}
