//! Command implementations behind the `basket-aad` binary.

pub mod benchmark;
pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use basket_aad::{Engine, GreeksEstimate, Method, PriceEstimate};
use thiserror::Error;

pub use benchmark::{run_benchmark, BenchmarkOptions, BenchmarkRow};
pub use config::RunConfigFile;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// Maps an engine error raised while handling `key`.
    pub fn from_engine(key: &str, e: basket_aad::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(format!("{key}: {e}"))
        } else {
            CliError::Config(format!("{key}: {e}"))
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<basket_aad::Error> for CliError {
    fn from(e: basket_aad::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Settings shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn load(config_path: &Path, opts: &RunOptions) -> Result<RunConfigFile, CliError> {
    let mut file = RunConfigFile::load(config_path)?;
    if let Some(seed) = opts.seed {
        file.seed = seed;
    }
    Ok(file)
}

pub fn format_price(p: &PriceEstimate) -> String {
    format!(
        "value={}, stderr={}, n_paths={}",
        p.value, p.stderr, p.n_paths
    )
}

pub fn cmd_price(config_path: &Path, opts: &RunOptions) -> Result<PriceEstimate, CliError> {
    let file = load(config_path, opts)?;
    let cfg = file.engine_config()?;
    Ok(Engine::new(&cfg)?.price())
}

pub fn cmd_greeks(
    config_path: &Path,
    method: Option<Method>,
    opts: &RunOptions,
) -> Result<GreeksEstimate, CliError> {
    let file = load(config_path, opts)?;
    let mut cfg = file.engine_config()?;
    if let Some(m) = method {
        cfg.method = m;
    }
    let estimate = Engine::new(&cfg)?.greeks(cfg.method)?;
    let out = opts.out.clone().or(file.output.greeks.clone());
    emit(out.as_deref(), |w| {
        write_greeks_csv(w, &cfg.correlation, &estimate)
    })?;
    Ok(estimate)
}

pub fn cmd_benchmark(
    config_path: &Path,
    bench: &BenchmarkOptions,
    opts: &RunOptions,
) -> Result<Vec<BenchmarkRow>, CliError> {
    let file = load(config_path, opts)?;
    let rows = run_benchmark(&file, bench)?;
    let out = opts.out.clone().or(file.output.benchmark.clone());
    emit(out.as_deref(), |w| write_benchmark_csv(w, &rows))?;
    Ok(rows)
}

fn emit(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            write(&mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

/// Columns `i,j,rho,dV_drho,stderr`, one row per pair `i > j` (zero-based).
/// The stderr field is empty when fewer than two bins were used.
pub fn write_greeks_csv(
    w: &mut dyn Write,
    rho: &basket_aad::CorrelationMatrix,
    g: &GreeksEstimate,
) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["i", "j", "rho", "dV_drho", "stderr"])?;
    let stderr = g.stderr().ok();
    for (pair, value) in g.mean.iter() {
        let se = stderr.map(|s| s.get(pair).to_string()).unwrap_or_default();
        csv.write_record([
            pair.i.to_string(),
            pair.j.to_string(),
            rho.get(pair.i, pair.j).to_string(),
            value.to_string(),
            se,
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Columns `n_names,method,ratio,seconds_value,seconds_total`.
pub fn write_benchmark_csv(w: &mut dyn Write, rows: &[BenchmarkRow]) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "n_names",
        "method",
        "ratio",
        "seconds_value",
        "seconds_total",
    ])?;
    for r in rows {
        csv.write_record([
            r.n_names.to_string(),
            r.method.to_string(),
            format!("{:.6}", r.ratio),
            format!("{:.6}", r.seconds_value),
            format!("{:.6}", r.seconds_total),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
