//! n-th to default basket default swap payout, seen from the protection
//! buyer: protection leg minus premium leg.
//!
//! The sharp payout has indicator functions in the default time and is not
//! pathwise differentiable. The smoothed payout replaces each indicator
//! `1{a < b}` by `Phi((b - a) / eps)` and is used for Greeks.

use crate::error::{Error, Result};
use crate::stochastics::{normal_cdf, normal_pdf};

/// Beyond this many smoothing widths an indicator is treated as saturated.
/// `Phi(8.3)` already rounds to 1 in double precision.
const SATURATION_WIDTHS: f64 = 8.3;

/// Contract terms. Times are in years, rates continuously compounded.
#[derive(Debug, Clone, PartialEq)]
pub struct BasketDefaultSwap {
    seniority: usize,
    maturity: f64,
    payment_times: Vec<f64>,
    spreads: Vec<f64>,
    recoveries: Vec<f64>,
    discount_rate: f64,
    smoothing_width: f64,
    payment_discounts: Vec<f64>,
}

impl BasketDefaultSwap {
    /// `seniority` is 1-based: 1 is first-to-default. Pass `None` for the
    /// smoothing width to use [`default_smoothing_width`].
    pub fn new(
        seniority: usize,
        maturity: f64,
        payment_times: Vec<f64>,
        spreads: Vec<f64>,
        recoveries: Vec<f64>,
        discount_rate: f64,
        smoothing_width: Option<f64>,
    ) -> Result<Self> {
        let names = recoveries.len();
        if names == 0 {
            return Err(Error::InvalidContract("basket has no names".into()));
        }
        if seniority == 0 || seniority > names {
            return Err(Error::InvalidContract(format!(
                "seniority {seniority} outside 1..={names}"
            )));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::InvalidContract(format!(
                "maturity {maturity} must be positive"
            )));
        }
        if payment_times.is_empty() {
            return Err(Error::InvalidContract("empty payment schedule".into()));
        }
        if payment_times.len() != spreads.len() {
            return Err(Error::InvalidContract(format!(
                "{} payment times but {} spreads",
                payment_times.len(),
                spreads.len()
            )));
        }
        if payment_times[0] <= 0.0 || payment_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidContract(
                "payment times must be positive and strictly increasing".into(),
            ));
        }
        if *payment_times.last().unwrap() > maturity {
            return Err(Error::InvalidContract(
                "last payment falls after maturity".into(),
            ));
        }
        if spreads.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidContract("non-finite spread".into()));
        }
        if let Some(r) = recoveries.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidContract(format!(
                "recovery {r} outside [0, 1]"
            )));
        }
        if !discount_rate.is_finite() {
            return Err(Error::InvalidContract("non-finite discount rate".into()));
        }
        let smoothing_width =
            smoothing_width.unwrap_or_else(|| default_smoothing_width(&payment_times));
        if !(smoothing_width > 0.0 && smoothing_width.is_finite()) {
            return Err(Error::InvalidContract(format!(
                "smoothing width {smoothing_width} must be positive"
            )));
        }
        let payment_discounts = payment_times
            .iter()
            .map(|t| (-discount_rate * t).exp())
            .collect();
        Ok(BasketDefaultSwap {
            seniority,
            maturity,
            payment_times,
            spreads,
            recoveries,
            discount_rate,
            smoothing_width,
            payment_discounts,
        })
    }

    /// Regular schedule `maturity / m, 2 maturity / m, ..., maturity` with a
    /// flat spread per payment period.
    pub fn regular(
        seniority: usize,
        maturity: f64,
        payments: usize,
        spread_per_period: f64,
        recoveries: Vec<f64>,
        discount_rate: f64,
    ) -> Result<Self> {
        let times = (1..=payments)
            .map(|k| maturity * k as f64 / payments as f64)
            .collect();
        Self::new(
            seniority,
            maturity,
            times,
            vec![spread_per_period; payments],
            recoveries,
            discount_rate,
            None,
        )
    }

    pub fn names(&self) -> usize {
        self.recoveries.len()
    }

    pub fn seniority(&self) -> usize {
        self.seniority
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn payment_times(&self) -> &[f64] {
        &self.payment_times
    }

    pub fn spreads(&self) -> &[f64] {
        &self.spreads
    }

    pub fn recoveries(&self) -> &[f64] {
        &self.recoveries
    }

    pub fn discount_rate(&self) -> f64 {
        self.discount_rate
    }

    pub fn smoothing_width(&self) -> f64 {
        self.smoothing_width
    }

    pub fn with_smoothing_width(&self, width: f64) -> Result<Self> {
        Self::new(
            self.seniority,
            self.maturity,
            self.payment_times.clone(),
            self.spreads.clone(),
            self.recoveries.clone(),
            self.discount_rate,
            Some(width),
        )
    }

    /// Sharp payout given the triggering default.
    pub fn sharp_value(&self, nth: NthDefault) -> f64 {
        let tau = nth.time;
        let protection = if tau <= self.maturity {
            (1.0 - self.recoveries[nth.index]) * (-self.discount_rate * tau).exp()
        } else {
            0.0
        };
        let premium: f64 = self
            .payment_times
            .iter()
            .zip(&self.spreads)
            .zip(&self.payment_discounts)
            .take_while(|((&t, _), _)| t < tau)
            .map(|((_, s), d)| s * d)
            .sum();
        protection - premium
    }

    /// Smoothed payout and its derivative with respect to the triggering
    /// default time.
    pub fn smoothed_value(&self, nth: NthDefault) -> (f64, f64) {
        let tau = nth.time;
        let eps = self.smoothing_width;
        let mut value = 0.0;
        let mut slope = 0.0;

        let lgd = 1.0 - self.recoveries[nth.index];
        let y = (self.maturity - tau) / eps;
        if y > -SATURATION_WIDTHS && lgd != 0.0 {
            let disc = (-self.discount_rate * tau).exp();
            let (cdf, pdf) = smoothed_indicator(y);
            value += lgd * disc * cdf;
            slope += lgd * disc * (-self.discount_rate * cdf - pdf / eps);
        }

        for ((&t, &s), &d) in self
            .payment_times
            .iter()
            .zip(&self.spreads)
            .zip(&self.payment_discounts)
        {
            let y = (tau - t) / eps;
            if y <= -SATURATION_WIDTHS {
                // Payment times are increasing, so all later ones are saturated at 0.
                break;
            }
            let (cdf, pdf) = smoothed_indicator(y);
            value -= s * d * cdf;
            slope -= s * d * pdf / eps;
        }
        (value, slope)
    }
}

#[inline]
fn smoothed_indicator(y: f64) -> (f64, f64) {
    if y >= SATURATION_WIDTHS {
        (1.0, 0.0)
    } else {
        (normal_cdf(y), normal_pdf(y))
    }
}

/// Default smoothing width: 5% of the shortest gap between consecutive
/// payments (the first gap is measured from time 0).
pub fn default_smoothing_width(payment_times: &[f64]) -> f64 {
    let mut prev = 0.0;
    let mut gap = f64::INFINITY;
    for &t in payment_times {
        gap = gap.min(t - prev);
        prev = t;
    }
    0.05 * gap
}

/// The default that triggers the contract: the name realising the n-th
/// smallest default time and that time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NthDefault {
    pub index: usize,
    pub time: f64,
}

/// n-th order statistic (1-based `n`) of `tau`; ties go to the lowest index.
/// `scratch` is resized as needed.
pub fn nth_default(tau: &[f64], n: usize, scratch: &mut Vec<usize>) -> NthDefault {
    debug_assert!(n >= 1 && n <= tau.len());
    let index = if n == 1 {
        // Common case without the index buffer; `<` keeps the lowest index on ties.
        let mut best = 0;
        for (k, &t) in tau.iter().enumerate().skip(1) {
            if t < tau[best] {
                best = k;
            }
        }
        best
    } else {
        scratch.clear();
        scratch.extend(0..tau.len());
        let (_, &mut idx, _) = scratch
            .select_nth_unstable_by(n - 1, |&a, &b| tau[a].total_cmp(&tau[b]).then(a.cmp(&b)));
        idx
    };
    NthDefault {
        index,
        time: tau[index],
    }
}

/// Payout value and `dP/dtau` per name.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoutResult {
    pub value: f64,
    pub x_bar: Vec<f64>,
}

fn check_tau(contract: &BasketDefaultSwap, tau: &[f64]) -> Result<()> {
    if tau.len() != contract.names() {
        return Err(Error::DimensionMismatch {
            expected: contract.names(),
            got: tau.len(),
        });
    }
    Ok(())
}

pub fn evaluate_sharp(contract: &BasketDefaultSwap, tau: &[f64]) -> Result<f64> {
    check_tau(contract, tau)?;
    let nth = nth_default(tau, contract.seniority, &mut Vec::new());
    Ok(contract.sharp_value(nth))
}

pub fn evaluate_smoothed(contract: &BasketDefaultSwap, tau: &[f64]) -> Result<PayoutResult> {
    check_tau(contract, tau)?;
    let nth = nth_default(tau, contract.seniority, &mut Vec::new());
    let (value, slope) = contract.smoothed_value(nth);
    let mut x_bar = vec![0.0; tau.len()];
    x_bar[nth.index] = slope;
    Ok(PayoutResult { value, x_bar })
}
