//! Synthetic two-block lead-lag panels.
//!
//! "Western" series load on a common factor `F_t`; "Eastern" series, whose
//! session closes before the Western one opens, load on yesterday's factor
//! `F_{t-1}` and optionally, through `overlap_loading`, on a slice of the same
//! day's factor (partially overlapping trading hours):
//!
//! ```text
//! W_t = common · F_t + noise · ε
//! E_t = lead_lag · F_{t-1} + overlap · F_t + noise · ε
//! ```
//!
//! Returns are scaled by [`DAILY_SCALE`] and compounded from a price of 100.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::SeriesLabel;
use crate::panel::{business_days, Frequency, PricePanel, ReturnPanel};
use crate::rng;

pub const DAILY_SCALE: f64 = 0.01;
const START_PRICE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n_west: usize,
    pub n_east: usize,
    pub common_loading: f64,
    pub lead_lag_loading: f64,
    pub overlap_loading: f64,
    pub noise: f64,
    pub days: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_west: 10,
            n_east: 10,
            common_loading: 0.6,
            lead_lag_loading: 0.6,
            overlap_loading: 0.0,
            noise: 0.5,
            days: 1250,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("common_loading", self.common_loading),
            ("lead_lag_loading", self.lead_lag_loading),
            ("overlap_loading", self.overlap_loading),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.noise >= 0.0) {
            return Err(Error::invalid(format!("noise scale must be non-negative, got {}", self.noise)));
        }
        if self.days < 100 {
            return Err(Error::invalid(format!("need at least 100 days, got {}", self.days)));
        }
        if self.n_west + self.n_east == 0 {
            return Err(Error::invalid("synthetic panel needs at least one series"));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        let w = (0..self.n_west).map(|i| format!("W{:02}", i + 1));
        let e = (0..self.n_east).map(|i| format!("E{:02}", i + 1));
        w.chain(e).collect()
    }
}

/// Daily log-returns of the synthetic panel (`days` rows).
pub fn generate_returns(spec: &SyntheticSpec) -> Result<ReturnPanel> {
    spec.validate()?;
    let mut r = rng::stream(spec.seed, 0);
    let t_len = spec.days;
    // factor[t + 1] is F_t; factor[0] is the day before the sample
    let factor: Vec<f64> = (0..=t_len).map(|_| StandardNormal.sample(&mut r)).collect();
    let n = spec.n_west + spec.n_east;
    let mut returns = DMatrix::zeros(t_len, n);
    for i in 0..n {
        let west = i < spec.n_west;
        for t in 0..t_len {
            let eps: f64 = StandardNormal.sample(&mut r);
            let signal = if west {
                spec.common_loading * factor[t + 1]
            } else {
                spec.lead_lag_loading * factor[t] + spec.overlap_loading * factor[t + 1]
            };
            returns[(t, i)] = DAILY_SCALE * (signal + spec.noise * eps);
        }
    }
    let dates = business_days(t_len + 1)[1..].to_vec();
    ReturnPanel::new(dates, spec.labels().iter().map(SeriesLabel::new).collect(), returns, Frequency::Daily)
}

/// Price panel whose log-returns follow [`generate_returns`].
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<PricePanel> {
    let returns = generate_returns(spec)?;
    let n = returns.n_series();
    let t_len = returns.n_rows();
    let mut prices = DMatrix::zeros(t_len + 1, n);
    for i in 0..n {
        let mut log_p = START_PRICE.ln();
        prices[(0, i)] = START_PRICE;
        for t in 0..t_len {
            log_p += returns.returns()[(t, i)];
            prices[(t + 1, i)] = log_p.exp();
        }
    }
    PricePanel::complete(business_days(t_len + 1), spec.labels(), prices)
}
