//! JSON run configuration.
//!
//! ```json
//! {
//!   "n_names": 5,
//!   "n_paths": 100000,
//!   "n_bins": 20,
//!   "seed": 42,
//!   "method": "aad-binned",
//!   "bump_size": 1e-4,
//!   "hazards": 0.02,
//!   "correlation": { "constant": 0.3 },
//!   "contract": {
//!     "seniority": 2,
//!     "maturity": 5.0,
//!     "payments_per_year": 4,
//!     "spread": 0.0025,
//!     "recoveries": 0.4,
//!     "discount_rate": 0.03
//!   },
//!   "output": { "greeks": "greeks.csv" }
//! }
//! ```
//!
//! Per-name quantities (`hazards`, `recoveries`) accept a scalar, broadcast
//! to every name, or a list of length `n_names`. `correlation` is either
//! `{"constant": rho}` or a full matrix. The schedule is either explicit
//! `payment_times` or `payments_per_year`; `spread` is the amount paid on
//! each payment date per unit notional (scalar or one per payment). Times
//! are in years, hazards and rates per year. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use basket_aad::corelin::validate_correlation;
use basket_aad::greeks::{DEFAULT_BINS, DEFAULT_BUMP};
use basket_aad::{BasketDefaultSwap, CorrelationMatrix, EngineConfig, Method};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PerName {
    Scalar(f64),
    List(Vec<f64>),
}

impl PerName {
    fn expand(&self, key: &str, n: usize) -> Result<Vec<f64>, CliError> {
        match self {
            PerName::Scalar(v) => Ok(vec![*v; n]),
            PerName::List(v) if v.len() == n => Ok(v.clone()),
            PerName::List(v) => Err(CliError::Config(format!(
                "{key}: expected {n} entries, got {}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CorrelationSpec {
    Constant(ConstantCorrelation),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantCorrelation {
    pub constant: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSpec {
    /// 1 for first-to-default, 2 for second-to-default, ...
    pub seniority: usize,
    pub maturity: f64,
    #[serde(default)]
    pub payment_times: Option<Vec<f64>>,
    #[serde(default)]
    pub payments_per_year: Option<u32>,
    pub spread: PerName,
    pub recoveries: PerName,
    #[serde(default)]
    pub discount_rate: f64,
    #[serde(default)]
    pub smoothing_width: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub greeks: Option<PathBuf>,
    #[serde(default)]
    pub benchmark: Option<PathBuf>,
}

/// The file as written by the user.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub n_names: usize,
    pub n_paths: usize,
    #[serde(default = "default_bins")]
    pub n_bins: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default = "default_bump")]
    pub bump_size: f64,
    pub hazards: PerName,
    pub correlation: CorrelationSpec,
    pub contract: ContractSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

fn default_bump() -> f64 {
    DEFAULT_BUMP
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn method(&self) -> Result<Method, CliError> {
        match &self.method {
            None => Ok(Method::AadBinned),
            Some(m) => m
                .parse()
                .map_err(|_| CliError::Config(format!("method: unknown method '{m}'"))),
        }
    }

    /// Engine configuration for the file's own basket size.
    pub fn engine_config(&self) -> Result<EngineConfig, CliError> {
        self.engine_config_for(self.n_names)
    }

    /// Engine configuration with the basket resized to `n` names; per-name
    /// quantities must then be scalars (or lists of length `n`).
    pub fn engine_config_for(&self, n: usize) -> Result<EngineConfig, CliError> {
        if n == 0 {
            return Err(CliError::Config("n_names: must be at least 1".into()));
        }
        let correlation = match &self.correlation {
            CorrelationSpec::Constant(c) => CorrelationMatrix::constant(n, c.constant),
            CorrelationSpec::Matrix(rows) if rows.len() == n => validate_correlation(rows),
            CorrelationSpec::Matrix(rows) => {
                return Err(CliError::Config(format!(
                    "correlation: expected {n} rows, got {}",
                    rows.len()
                )))
            }
        }
        .map_err(|e| CliError::from_engine("correlation", e))?;

        let c = &self.contract;
        let times = match (&c.payment_times, c.payments_per_year) {
            (Some(t), None) => t.clone(),
            (None, Some(f)) if f > 0 => {
                let m = (c.maturity * f as f64).round() as usize;
                (1..=m).map(|k| k as f64 / f as f64).collect()
            }
            (None, Some(_)) => {
                return Err(CliError::Config(
                    "contract.payments_per_year: must be positive".into(),
                ))
            }
            _ => {
                return Err(CliError::Config(
                    "contract: give exactly one of payment_times and payments_per_year".into(),
                ))
            }
        };
        let spreads = c.spread.expand("contract.spread", times.len())?;
        let recoveries = c.recoveries.expand("contract.recoveries", n)?;
        let contract = BasketDefaultSwap::new(
            c.seniority,
            c.maturity,
            times,
            spreads,
            recoveries,
            c.discount_rate,
            c.smoothing_width,
        )
        .map_err(|e| CliError::from_engine("contract", e))?;

        let hazards = self.hazards.expand("hazards", n)?;
        if let Some(h) = hazards.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(CliError::Config(format!(
                "hazards: {h} is not a positive rate"
            )));
        }
        if self.n_paths == 0 {
            return Err(CliError::Config("n_paths: must be positive".into()));
        }
        if self.n_bins == 0 || self.n_bins > self.n_paths {
            return Err(CliError::Config(format!(
                "n_bins: must lie in 1..={}",
                self.n_paths
            )));
        }
        if !(self.bump_size > 0.0 && self.bump_size.is_finite()) {
            return Err(CliError::Config("bump_size: must be positive".into()));
        }
        Ok(EngineConfig {
            n_paths: self.n_paths,
            n_bins: self.n_bins,
            seed: self.seed,
            hazards,
            contract,
            correlation,
            method: self.method()?,
            bump_size: self.bump_size,
        })
    }
}
