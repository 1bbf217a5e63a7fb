//! Pricing and correlation Greeks.
//!
//! Four estimators of `dV/d rho[i][j]` for every strictly-lower pair:
//!
//! * `bump`: one-sided finite differences, one full revaluation per pair,
//!   sharing random numbers with the base run;
//! * `forward`: tangent mode through the path, one sweep per pair;
//! * `aad-per-path`: adjoint sweep per path followed by an adjoint Cholesky
//!   conversion per path;
//! * `aad-binned`: adjoint sweep per path, with the `c_bar` adjoints averaged
//!   inside `n_bins` equal bins and converted once per bin. Because the
//!   conversion is linear in `c_bar`, the point estimate does not depend on
//!   the number of bins; the spread across bins gives the standard error.
//!
//! Paths are processed in fixed blocks of contiguous path indices that never
//! straddle a bin boundary. Block results are merged in index order, so
//! every estimate is bitwise reproducible for a given seed whatever the size
//! of the rayon pool it runs on.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::copula::{
    adjoint_sweep_accumulate, forward_path_sensitivity_into, simulate_path_into, AdjointScratch,
    PathTape,
};
use crate::corelin::{
    bump_pair, cholesky_adjoint, cholesky_factorize, cholesky_tangent, CholeskyFactor,
    CorrelationGradient, CorrelationMatrix, LowerTriangularSeed, Pair,
};
use crate::error::{Error, Result};
use crate::payout::{nth_default, BasketDefaultSwap};
use crate::stats::{RunningStats, VecStats};
use crate::stochastics::{ExponentialMarginal, RngStream};

/// Paths per work item.
const BLOCK_PATHS: usize = 512;

/// Number of times a bump is divided by 10 before giving up.
const BUMP_SHRINKS: usize = 3;

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_BUMP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Bump,
    Forward,
    AadPerPath,
    AadBinned,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Bump,
        Method::Forward,
        Method::AadPerPath,
        Method::AadBinned,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bump => "bump",
            Method::Forward => "forward",
            Method::AadPerPath => "aad-per-path",
            Method::AadBinned => "aad-binned",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s || m.as_str().replace('-', "_") == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// Everything needed to run the engine.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub n_paths: usize,
    pub n_bins: usize,
    pub seed: u64,
    /// Default intensity per name, per year.
    pub hazards: Vec<f64>,
    pub contract: BasketDefaultSwap,
    pub correlation: CorrelationMatrix,
    pub method: Method,
    pub bump_size: f64,
}

impl EngineConfig {
    /// Config with 20 bins, bump size 1e-4 and the binned adjoint method.
    pub fn new(
        correlation: CorrelationMatrix,
        hazards: Vec<f64>,
        contract: BasketDefaultSwap,
        n_paths: usize,
        seed: u64,
    ) -> Self {
        EngineConfig {
            n_paths,
            n_bins: DEFAULT_BINS,
            seed,
            hazards,
            contract,
            correlation,
            method: Method::AadBinned,
            bump_size: DEFAULT_BUMP,
        }
    }

    pub fn n_names(&self) -> usize {
        self.correlation.dim()
    }

    /// Paths actually simulated: `n_paths` rounded down to a multiple of
    /// `n_bins`.
    pub fn effective_paths(&self) -> usize {
        if self.n_bins == 0 {
            return 0;
        }
        self.n_bins * (self.n_paths / self.n_bins)
    }
}

/// Monte Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

impl From<&RunningStats> for PriceEstimate {
    fn from(s: &RunningStats) -> Self {
        PriceEstimate {
            value: s.mean(),
            stderr: s.standard_error(),
            n_paths: s.count(),
        }
    }
}

/// Correlation sensitivities with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GreeksEstimate {
    pub method: Method,
    pub mean: CorrelationGradient,
    stderr: Option<CorrelationGradient>,
    /// Independent samples behind the standard error: bins for
    /// `aad-binned`, paths otherwise.
    pub n_bins: usize,
    pub price: PriceEstimate,
}

impl GreeksEstimate {
    pub fn stderr(&self) -> Result<&CorrelationGradient> {
        self.stderr.as_ref().ok_or(Error::NBinsTooSmall {
            n_bins: self.n_bins,
        })
    }
}

/// Running sums for one bin of paths.
#[derive(Debug, Clone)]
pub struct BinAccumulator {
    pub sum_cbar: LowerTriangularSeed,
    pub count: usize,
    /// Sharp payouts of the bin's paths.
    pub payout: RunningStats,
}

impl BinAccumulator {
    pub fn new(n: usize) -> Self {
        BinAccumulator {
            sum_cbar: LowerTriangularSeed::zeros(n),
            count: 0,
            payout: RunningStats::new(),
        }
    }

    pub fn merge(&mut self, other: &BinAccumulator) {
        self.sum_cbar.add_scaled(1.0, &other.sum_cbar);
        self.count += other.count;
        self.payout.merge(&other.payout);
    }

    pub fn mean_cbar(&self) -> LowerTriangularSeed {
        let mut m = self.sum_cbar.clone();
        m.scale(1.0 / self.count as f64);
        m
    }
}

/// Converts each bin's average `c_bar` into a correlation gradient and
/// combines the bin estimates into a mean and standard error.
pub fn combine_bins(bins: &[BinAccumulator], c: &CholeskyFactor) -> Result<GreeksEstimate> {
    let first = bins.first().ok_or(Error::NBinsTooSmall { n_bins: 0 })?;
    if let Some(b) = bins.iter().find(|b| b.count != first.count) {
        return Err(Error::UnequalBins {
            first: first.count,
            other: b.count,
        });
    }
    let per_bin: Vec<CorrelationGradient> = bins
        .par_iter()
        .map(|b| cholesky_adjoint(c, &b.mean_cbar()))
        .collect::<Result<_>>()?;

    let n = c.dim();
    let pairs = Pair::count(n);
    let nb = bins.len() as f64;
    let mut mean = vec![0.0; pairs];
    for g in &per_bin {
        for (m, v) in mean.iter_mut().zip(g.as_slice()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nb);
    let stderr = (bins.len() >= 2).then(|| {
        let mut var = vec![0.0; pairs];
        for g in &per_bin {
            for ((s, v), m) in var.iter_mut().zip(g.as_slice()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let se = var
            .into_iter()
            .map(|s| (s / (nb - 1.0) / nb).sqrt())
            .collect();
        CorrelationGradient::from_packed(n, se).expect("packed length")
    });

    let mut payout = RunningStats::new();
    for b in bins {
        payout.merge(&b.payout);
    }
    Ok(GreeksEstimate {
        method: Method::AadBinned,
        mean: CorrelationGradient::from_packed(n, mean)?,
        stderr,
        n_bins: bins.len(),
        price: PriceEstimate::from(&payout),
    })
}

#[derive(Debug, Clone, Copy)]
struct Block {
    bin: usize,
    start: usize,
    end: usize,
}

/// A validated configuration with its factorization and marginals.
#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    marginals: Vec<ExponentialMarginal>,
    factor: CholeskyFactor,
    n_paths: usize,
    blocks: Vec<Block>,
}

/// Per-worker buffers.
struct Workspace {
    tape: PathTape,
    order: Vec<usize>,
    x_bar: Vec<f64>,
    adjoint: AdjointScratch,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            tape: PathTape::new(n),
            order: Vec::with_capacity(n),
            x_bar: vec![0.0; n],
            adjoint: AdjointScratch::new(n),
        }
    }
}

/// Base run of the bump estimator: smoothed payouts per path at the
/// unbumped correlation, plus the price.
#[derive(Debug, Clone)]
pub struct BumpBase {
    smoothed: Vec<f64>,
    pub price: PriceEstimate,
}

impl BumpBase {
    /// Mean of the smoothed payout, for measuring the smoothing bias.
    pub fn smoothed_price(&self) -> PriceEstimate {
        let mut s = RunningStats::new();
        self.smoothed.iter().for_each(|&v| s.push(v));
        PriceEstimate::from(&s)
    }
}

/// One bumped revaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBump {
    pub pair: Pair,
    pub derivative: f64,
    pub stderr: f64,
    /// Bump size actually used after any shrinking.
    pub h: f64,
}

impl Engine {
    pub fn new(config: &EngineConfig) -> Result<Self> {
        let n = config.n_names();
        if n == 0 {
            return Err(Error::InvalidConfig("no names".into()));
        }
        if config.hazards.len() != n {
            return Err(Error::InvalidConfig(format!(
                "{} hazards for {n} names",
                config.hazards.len()
            )));
        }
        if config.contract.names() != n {
            return Err(Error::InvalidConfig(format!(
                "contract has {} recoveries for {n} names",
                config.contract.names()
            )));
        }
        if config.n_bins == 0 || config.n_bins > config.n_paths {
            return Err(Error::InvalidConfig(format!(
                "n_bins = {} must lie in 1..={}",
                config.n_bins, config.n_paths
            )));
        }
        if !(config.bump_size > 0.0 && config.bump_size.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bump_size {} must be positive",
                config.bump_size
            )));
        }
        let marginals = config
            .hazards
            .iter()
            .map(|&h| ExponentialMarginal::new(h))
            .collect::<Result<Vec<_>>>()?;
        let factor = cholesky_factorize(&config.correlation)?;
        let n_paths = config.effective_paths();
        if n_paths != config.n_paths {
            log::warn!(
                "n_paths = {} is not a multiple of n_bins = {}; using {} paths",
                config.n_paths,
                config.n_bins,
                n_paths
            );
        }
        let bin_len = n_paths / config.n_bins;
        let mut blocks = Vec::new();
        for bin in 0..config.n_bins {
            let end = (bin + 1) * bin_len;
            let mut start = bin * bin_len;
            while start < end {
                let stop = (start + BLOCK_PATHS).min(end);
                blocks.push(Block {
                    bin,
                    start,
                    end: stop,
                });
                start = stop;
            }
        }
        Ok(Engine {
            config: config.clone(),
            marginals,
            factor,
            n_paths,
            blocks,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn n(&self) -> usize {
        self.factor.dim()
    }

    #[inline]
    fn stream(&self, path: usize) -> RngStream {
        RngStream::new(self.config.seed, path as u64)
    }

    /// Runs `f` over every block in parallel and returns the results in
    /// block order.
    fn map_blocks<T: Send>(&self, f: impl Fn(Block, &mut Workspace) -> T + Sync) -> Vec<T> {
        let n = self.n();
        self.blocks
            .par_iter()
            .map_init(|| Workspace::new(n), |ws, &b| f(b, ws))
            .collect()
    }

    fn simulate(&self, factor: &CholeskyFactor, path: usize, ws: &mut Workspace) {
        let clamped = simulate_path_into(factor, &self.marginals, self.stream(path), &mut ws.tape);
        if clamped > 0 {
            log::debug!("path {path}: {clamped} uniforms clamped");
        }
    }

    /// Mean and standard error of the sharp payout.
    pub fn price(&self) -> PriceEstimate {
        let contract = &self.config.contract;
        let partials = self.map_blocks(|b, ws| {
            let mut stats = RunningStats::new();
            for path in b.start..b.end {
                self.simulate(&self.factor, path, ws);
                let nth = nth_default(&ws.tape.x, contract.seniority(), &mut ws.order);
                stats.push(contract.sharp_value(nth));
            }
            stats
        });
        PriceEstimate::from(&RunningStats::merge_all(&partials))
    }

    /// Per-bin accumulators of the adjoint `c_bar` and the sharp payout.
    pub fn accumulate_bins(&self) -> Vec<BinAccumulator> {
        let n = self.n();
        let contract = &self.config.contract;
        let partials = self.map_blocks(|b, ws| {
            let mut acc = BinAccumulator::new(n);
            for path in b.start..b.end {
                self.simulate(&self.factor, path, ws);
                let nth = nth_default(&ws.tape.x, contract.seniority(), &mut ws.order);
                acc.payout.push(contract.sharp_value(nth));
                let (_, slope) = contract.smoothed_value(nth);
                ws.x_bar[nth.index] = slope;
                adjoint_sweep_accumulate(
                    &ws.tape,
                    &self.marginals,
                    &ws.x_bar,
                    &mut ws.adjoint,
                    &mut acc.sum_cbar,
                );
                ws.x_bar[nth.index] = 0.0;
                acc.count += 1;
            }
            (b.bin, acc)
        });
        let mut bins: Vec<BinAccumulator> = (0..self.config.n_bins)
            .map(|_| BinAccumulator::new(n))
            .collect();
        for (bin, acc) in &partials {
            bins[*bin].merge(acc);
        }
        bins
    }

    pub fn greeks_aad_binned(&self) -> Result<GreeksEstimate> {
        self.factor.check_strictly_positive()?;
        combine_bins(&self.accumulate_bins(), &self.factor)
    }

    pub fn greeks_aad_per_path(&self) -> Result<GreeksEstimate> {
        self.factor.check_strictly_positive()?;
        let n = self.n();
        let contract = &self.config.contract;
        let partials = self.map_blocks(|b, ws| -> Result<(VecStats, RunningStats)> {
            let mut grads = VecStats::new(Pair::count(n));
            let mut payout = RunningStats::new();
            let mut c_bar = LowerTriangularSeed::zeros(n);
            for path in b.start..b.end {
                self.simulate(&self.factor, path, ws);
                let nth = nth_default(&ws.tape.x, contract.seniority(), &mut ws.order);
                payout.push(contract.sharp_value(nth));
                let (_, slope) = contract.smoothed_value(nth);
                ws.x_bar[nth.index] = slope;
                c_bar.fill_zero();
                adjoint_sweep_accumulate(
                    &ws.tape,
                    &self.marginals,
                    &ws.x_bar,
                    &mut ws.adjoint,
                    &mut c_bar,
                );
                ws.x_bar[nth.index] = 0.0;
                grads.push(cholesky_adjoint(&self.factor, &c_bar)?.as_slice());
            }
            Ok((grads, payout))
        });
        self.finish_per_path(Method::AadPerPath, partials)
    }

    pub fn greeks_forward(&self) -> Result<GreeksEstimate> {
        let n = self.n();
        let tangents: Vec<LowerTriangularSeed> = Pair::all(n)
            .map(|p| cholesky_tangent(&self.factor, p))
            .collect::<Result<_>>()?;
        let contract = &self.config.contract;
        let partials = self.map_blocks(|b, ws| -> Result<(VecStats, RunningStats)> {
            let mut grads = VecStats::new(tangents.len());
            let mut payout = RunningStats::new();
            let mut x_dot = vec![0.0; n];
            let mut p_dot = vec![0.0; tangents.len()];
            for path in b.start..b.end {
                self.simulate(&self.factor, path, ws);
                let nth = nth_default(&ws.tape.x, contract.seniority(), &mut ws.order);
                payout.push(contract.sharp_value(nth));
                let (_, slope) = contract.smoothed_value(nth);
                ws.x_bar[nth.index] = slope;
                for (pd, c_dot) in p_dot.iter_mut().zip(&tangents) {
                    forward_path_sensitivity_into(&ws.tape, &self.marginals, c_dot, &mut x_dot);
                    *pd = crate::corelin::dot(&ws.x_bar, &x_dot);
                }
                ws.x_bar[nth.index] = 0.0;
                grads.push(&p_dot);
            }
            Ok((grads, payout))
        });
        self.finish_per_path(Method::Forward, partials)
    }

    fn finish_per_path(
        &self,
        method: Method,
        partials: Vec<Result<(VecStats, RunningStats)>>,
    ) -> Result<GreeksEstimate> {
        let n = self.n();
        let mut grads = VecStats::new(Pair::count(n));
        let mut payout = RunningStats::new();
        for part in partials {
            let (g, p) = part?;
            grads.merge(&g);
            payout.merge(&p);
        }
        Ok(GreeksEstimate {
            method,
            mean: CorrelationGradient::from_packed(n, grads.means().to_vec())?,
            stderr: (grads.count() >= 2).then(|| {
                CorrelationGradient::from_packed(n, grads.standard_errors()).expect("packed length")
            }),
            n_bins: grads.count(),
            price: PriceEstimate::from(&payout),
        })
    }

    /// Smoothed payouts at the base correlation, with the price.
    pub fn bump_base(&self) -> BumpBase {
        let contract = &self.config.contract;
        let partials = self.map_blocks(|b, ws| {
            let mut stats = RunningStats::new();
            let mut smoothed = Vec::with_capacity(b.end - b.start);
            for path in b.start..b.end {
                self.simulate(&self.factor, path, ws);
                let nth = nth_default(&ws.tape.x, contract.seniority(), &mut ws.order);
                stats.push(contract.sharp_value(nth));
                smoothed.push(contract.smoothed_value(nth).0);
            }
            (stats, smoothed)
        });
        let price = RunningStats::merge_all(partials.iter().map(|(s, _)| s));
        BumpBase {
            smoothed: partials.into_iter().flat_map(|(_, v)| v).collect(),
            price: PriceEstimate::from(&price),
        }
    }

    /// One-sided difference quotient for one pair, on the same random
    /// numbers as `base`. The bump is shrunk by 10 up to three times if it
    /// leaves the set of valid correlation matrices.
    pub fn bump_pair(&self, base: &BumpBase, pair: Pair) -> Result<PairBump> {
        let mut h = self.config.bump_size;
        let mut attempt = 0;
        let bumped = loop {
            match bump_pair(&self.config.correlation, pair, h) {
                Ok(rho) => break rho,
                Err(Error::NotPositiveSemidefinite { .. } | Error::EntryOutOfRange { .. })
                    if attempt < BUMP_SHRINKS =>
                {
                    log::warn!(
                        "bump {h} of pair ({}, {}) is infeasible; shrinking",
                        pair.i,
                        pair.j
                    );
                    h /= 10.0;
                    attempt += 1;
                }
                Err(Error::NotPositiveSemidefinite { .. } | Error::EntryOutOfRange { .. }) => {
                    return Err(Error::BumpBreaksPsd {
                        i: pair.i,
                        j: pair.j,
                        h,
                    });
                }
                Err(e) => return Err(e),
            }
        };
        let factor = cholesky_factorize(&bumped)?;
        let contract = &self.config.contract;
        let partials = self.map_blocks(|b, ws| {
            let mut stats = RunningStats::new();
            for path in b.start..b.end {
                self.simulate(&factor, path, ws);
                let nth = nth_default(&ws.tape.x, contract.seniority(), &mut ws.order);
                let value = contract.smoothed_value(nth).0;
                stats.push((value - base.smoothed[path]) / h);
            }
            stats
        });
        let stats = RunningStats::merge_all(&partials);
        Ok(PairBump {
            pair,
            derivative: stats.mean(),
            stderr: stats.standard_error(),
            h,
        })
    }

    pub fn greeks_bump(&self) -> Result<GreeksEstimate> {
        let n = self.n();
        let base = self.bump_base();
        let mut mean = CorrelationGradient::zeros(n);
        let mut stderr = CorrelationGradient::zeros(n);
        for pair in Pair::all(n) {
            let r = self.bump_pair(&base, pair)?;
            mean.set(pair, r.derivative);
            stderr.set(pair, r.stderr);
        }
        Ok(GreeksEstimate {
            method: Method::Bump,
            mean,
            stderr: (self.n_paths >= 2).then_some(stderr),
            n_bins: self.n_paths,
            price: base.price,
        })
    }

    /// Runs the estimator selected by `method`.
    pub fn greeks(&self, method: Method) -> Result<GreeksEstimate> {
        match method {
            Method::Bump => self.greeks_bump(),
            Method::Forward => self.greeks_forward(),
            Method::AadPerPath => self.greeks_aad_per_path(),
            Method::AadBinned => self.greeks_aad_binned(),
        }
    }
}

pub fn price(config: &EngineConfig) -> Result<PriceEstimate> {
    Ok(Engine::new(config)?.price())
}

/// Adjoint estimator; `config.method` chooses between per-path and binned
/// conversion (anything else is treated as binned).
pub fn correlation_greeks_aad(config: &EngineConfig) -> Result<GreeksEstimate> {
    let engine = Engine::new(config)?;
    match config.method {
        Method::AadPerPath => engine.greeks_aad_per_path(),
        _ => engine.greeks_aad_binned(),
    }
}

pub fn correlation_greeks_forward(config: &EngineConfig) -> Result<GreeksEstimate> {
    Engine::new(config)?.greeks_forward()
}

pub fn correlation_greeks_bump(config: &EngineConfig) -> Result<GreeksEstimate> {
    Engine::new(config)?.greeks_bump()
}

/// Dispatches on `config.method`.
pub fn correlation_greeks(config: &EngineConfig) -> Result<GreeksEstimate> {
    Engine::new(config)?.greeks(config.method)
}
