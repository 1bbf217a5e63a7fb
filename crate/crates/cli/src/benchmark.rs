//! Cost of each Greeks method relative to pricing alone, across basket
//! sizes.
//!
//! Every timing is the median of `repeats` runs after one untimed warm-up.
//! The bump method is timed as the base revaluation plus the bumped
//! revaluations of an evenly spaced sample of at most `max_bump_pairs`
//! pairs, scaled up to the full pair count: every bumped revaluation is a
//! full Monte Carlo run of identical cost, and timing all `N(N-1)/2` of them
//! at large `N` is prohibitively slow.

use std::time::Instant;

use basket_aad::{Engine, Method, Pair};

use crate::config::RunConfigFile;
use crate::CliError;

/// Coefficient of variation above which a timing counts as unstable.
pub const MAX_TIMING_CV: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub names_grid: Vec<usize>,
    pub methods: Vec<Method>,
    pub repeats: usize,
    pub max_bump_pairs: usize,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            names_grid: vec![8, 16, 24, 32, 40, 48, 64],
            methods: vec![Method::Bump, Method::AadPerPath, Method::AadBinned],
            repeats: 3,
            max_bump_pairs: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub n_names: usize,
    pub method: Method,
    /// `seconds_total / seconds_value`.
    pub ratio: f64,
    pub seconds_value: f64,
    pub seconds_total: f64,
    /// Largest coefficient of variation of the repeats behind this row.
    pub cv: f64,
}

impl BenchmarkRow {
    pub fn is_stable(&self) -> bool {
        self.cv <= MAX_TIMING_CV
    }
}

#[derive(Debug, Clone, Copy)]
struct Timing {
    median: f64,
    cv: f64,
}

fn summarize(mut samples: Vec<f64>) -> Timing {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Timing {
        median: samples[samples.len() / 2],
        cv: if mean > 0.0 { var.sqrt() / mean } else { 0.0 },
    }
}

fn time_repeats(
    repeats: usize,
    mut run: impl FnMut() -> Result<f64, CliError>,
) -> Result<Timing, CliError> {
    run()?;
    let samples = (0..repeats.max(1))
        .map(|_| run())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(samples))
}

fn seconds(f: impl FnOnce() -> Result<(), CliError>) -> Result<f64, CliError> {
    let start = Instant::now();
    f()?;
    Ok(start.elapsed().as_secs_f64())
}

/// Evenly spaced pairs in packed order, at most `k` of them.
fn sampled_pairs(n: usize, k: usize) -> Vec<Pair> {
    let all: Vec<Pair> = Pair::all(n).collect();
    let k = k.clamp(1, all.len().max(1)).min(all.len());
    (0..k).map(|m| all[m * all.len() / k]).collect()
}

/// Wall-clock seconds of one estimated bump run.
fn time_bump(engine: &Engine, max_pairs: usize) -> Result<f64, CliError> {
    let n = engine.config().n_names();
    let pairs = sampled_pairs(n, max_pairs);
    let start = Instant::now();
    let base = engine.bump_base();
    let base_secs = start.elapsed().as_secs_f64();
    let mut pair_secs = 0.0;
    for &pair in &pairs {
        pair_secs += seconds(|| {
            engine.bump_pair(&base, pair)?;
            Ok(())
        })?;
    }
    let scale = if pairs.is_empty() {
        0.0
    } else {
        Pair::count(n) as f64 / pairs.len() as f64
    };
    Ok(base_secs + pair_secs * scale)
}

pub fn run_benchmark(
    file: &RunConfigFile,
    opts: &BenchmarkOptions,
) -> Result<Vec<BenchmarkRow>, CliError> {
    let mut rows = Vec::new();
    for &n in &opts.names_grid {
        let cfg = file.engine_config_for(n)?;
        let value = time_repeats(opts.repeats, || {
            seconds(|| {
                Engine::new(&cfg)?.price();
                Ok(())
            })
        })?;
        for &method in &opts.methods {
            let total = time_repeats(opts.repeats, || match method {
                Method::Bump => {
                    let start = Instant::now();
                    let engine = Engine::new(&cfg)?;
                    let setup = start.elapsed().as_secs_f64();
                    Ok(setup + time_bump(&engine, opts.max_bump_pairs)?)
                }
                _ => seconds(|| {
                    Engine::new(&cfg)?.greeks(method)?;
                    Ok(())
                }),
            })?;
            let row = BenchmarkRow {
                n_names: n,
                method,
                ratio: total.median / value.median,
                seconds_value: value.median,
                seconds_total: total.median,
                cv: value.cv.max(total.cv),
            };
            log::info!(
                "N={n} {method}: ratio {:.3} ({:.4}s / {:.4}s)",
                row.ratio,
                row.seconds_total,
                row.seconds_value
            );
            if !row.is_stable() {
                log::warn!(
                    "N={n} {method}: timing coefficient of variation {:.2} exceeds {MAX_TIMING_CV}",
                    row.cv
                );
            }
            rows.push(row);
        }
    }
    Ok(rows)
}
