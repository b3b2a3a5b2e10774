//! Price and return panels: loading, calendar reconciliation, log-returns and
//! weekly aggregation.

pub(crate) mod io;

use std::collections::{HashMap, HashSet};

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::SeriesLabel;

pub use io::{read_price_csv, read_return_csv, write_price_csv, write_return_csv};

/// One `(date, label, price)` observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceRecord {
    pub date: NaiveDate,
    pub label: String,
    pub price: f64,
}

impl PriceRecord {
    pub fn new(date: NaiveDate, label: impl Into<String>, price: f64) -> Self {
        Self { date, label: label.into(), price }
    }
}

/// Daily closing prices on a common date axis. Missing observations hold NaN
/// and are flagged in the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    labels: Vec<String>,
    prices: DMatrix<f64>,
    missing: DMatrix<bool>,
}

impl PricePanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        labels: Vec<String>,
        mut prices: DMatrix<f64>,
        missing: DMatrix<bool>,
    ) -> Result<Self> {
        let shape = (dates.len(), labels.len());
        if prices.shape() != shape || missing.shape() != shape {
            return Err(Error::invalid(format!(
                "price matrix {:?} / mask {:?} do not match {} dates x {} labels",
                prices.shape(),
                missing.shape(),
                shape.0,
                shape.1
            )));
        }
        if labels.is_empty() {
            return Err(Error::invalid("price panel needs at least one series"));
        }
        check_dates(&dates)?;
        check_unique(labels.iter())?;
        for i in 0..shape.1 {
            for t in 0..shape.0 {
                if missing[(t, i)] {
                    prices[(t, i)] = f64::NAN;
                } else if !(prices[(t, i)] > 0.0) || !prices[(t, i)].is_finite() {
                    return Err(Error::NonPositivePrice {
                        row: t,
                        label: labels[i].clone(),
                        price: prices[(t, i)],
                    });
                }
            }
        }
        Ok(Self { dates, labels, prices, missing })
    }

    /// Panel with every observation present.
    pub fn complete(dates: Vec<NaiveDate>, labels: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        let missing = DMatrix::from_element(prices.nrows(), prices.ncols(), false);
        Self::new(dates, labels, prices, missing)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn missing(&self) -> &DMatrix<bool> {
        &self.missing
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.labels.len()
    }

    pub fn price(&self, t: usize, i: usize) -> Option<f64> {
        (!self.missing[(t, i)]).then(|| self.prices[(t, i)])
    }

    pub fn has_gaps(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    fn keep_rows(&self, rows: &[usize]) -> PricePanel {
        let n = self.n_series();
        PricePanel {
            dates: rows.iter().map(|&t| self.dates[t]).collect(),
            labels: self.labels.clone(),
            prices: DMatrix::from_fn(rows.len(), n, |r, i| self.prices[(rows[r], i)]),
            missing: DMatrix::from_fn(rows.len(), n, |r, i| self.missing[(rows[r], i)]),
        }
    }
}

fn check_dates(dates: &[NaiveDate]) -> Result<()> {
    if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!(
            "dates must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

fn check_unique<T: std::fmt::Display + Eq + std::hash::Hash>(
    labels: impl Iterator<Item = T>,
) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        let text = l.to_string();
        if !seen.insert(l) {
            return Err(Error::invalid(format!("duplicate series label {text}")));
        }
    }
    Ok(())
}

/// Builds a panel from long-format records. Labels keep their order of first
/// appearance; dates are sorted. Absent `(date, label)` pairs are flagged
/// missing. An exact duplicate record is accepted once.
pub fn load_price_table<I>(records: I) -> Result<PricePanel>
where
    I: IntoIterator<Item = PriceRecord>,
{
    let mut labels: Vec<String> = Vec::new();
    let mut label_ix: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(NaiveDate, usize), f64> = HashMap::new();
    let mut dates = Vec::new();

    for (row, rec) in records.into_iter().enumerate() {
        if !(rec.price > 0.0) || !rec.price.is_finite() {
            return Err(Error::NonPositivePrice { row, label: rec.label, price: rec.price });
        }
        let ix = match label_ix.get(&rec.label) {
            Some(&ix) => ix,
            None => {
                labels.push(rec.label.clone());
                label_ix.insert(rec.label.clone(), labels.len() - 1);
                labels.len() - 1
            }
        };
        match cells.insert((rec.date, ix), rec.price) {
            Some(prev) if prev != rec.price => {
                return Err(Error::ConflictingDuplicate {
                    row,
                    date: rec.date.to_string(),
                    label: rec.label,
                });
            }
            Some(_) => {}
            None => dates.push(rec.date),
        }
    }
    if labels.is_empty() {
        return Err(Error::invalid("price table has no records"));
    }
    dates.sort_unstable();
    dates.dedup();
    let date_ix: HashMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();

    let mut prices = DMatrix::from_element(dates.len(), labels.len(), f64::NAN);
    let mut missing = DMatrix::from_element(dates.len(), labels.len(), true);
    for ((date, i), p) in cells {
        let t = date_ix[&date];
        prices[(t, i)] = p;
        missing[(t, i)] = false;
    }
    PricePanel::new(dates, labels, prices, missing)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalendarMode {
    /// Keep only dates on which every series traded.
    Intersection,
    /// Carry the last price forward for at most `max_consecutive_fill` rows.
    UnionFillForward,
    /// Carry the last price forward without a cap, so every gap becomes a
    /// zero return.
    UnionZeroReturn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalendarPolicy {
    pub mode: CalendarMode,
    pub max_consecutive_fill: usize,
}

impl Default for CalendarPolicy {
    fn default() -> Self {
        Self { mode: CalendarMode::UnionFillForward, max_consecutive_fill: 5 }
    }
}

impl CalendarPolicy {
    pub fn intersection() -> Self {
        Self { mode: CalendarMode::Intersection, max_consecutive_fill: 0 }
    }

    pub fn fill_forward(max_consecutive_fill: usize) -> Self {
        Self { mode: CalendarMode::UnionFillForward, max_consecutive_fill }
    }

    pub fn zero_return() -> Self {
        Self { mode: CalendarMode::UnionZeroReturn, max_consecutive_fill: 0 }
    }
}

/// Reconciles trading calendars so that no observation is missing. Rows that
/// still contain a gap after filling are dropped. Prices are never
/// interpolated, only carried forward.
pub fn align_calendars(panel: &PricePanel, policy: CalendarPolicy) -> Result<PricePanel> {
    let (n_t, n) = (panel.n_dates(), panel.n_series());
    for i in 0..n {
        if (0..n_t).all(|t| panel.missing[(t, i)]) {
            return Err(Error::EmptySeries(panel.labels[i].clone()));
        }
    }

    let filled = match policy.mode {
        CalendarMode::Intersection => panel.clone(),
        CalendarMode::UnionFillForward => fill_forward(panel, Some(policy.max_consecutive_fill)),
        CalendarMode::UnionZeroReturn => fill_forward(panel, None),
    };
    let rows: Vec<usize> = (0..n_t)
        .filter(|&t| (0..n).all(|i| !filled.missing[(t, i)]))
        .collect();
    Ok(filled.keep_rows(&rows))
}

fn fill_forward(panel: &PricePanel, cap: Option<usize>) -> PricePanel {
    let mut out = panel.clone();
    for i in 0..panel.n_series() {
        let mut last: Option<f64> = None;
        let mut run = 0usize;
        for t in 0..panel.n_dates() {
            if !panel.missing[(t, i)] {
                last = Some(panel.prices[(t, i)]);
                run = 0;
                continue;
            }
            run += 1;
            if let Some(p) = last {
                if cap.is_none_or(|c| run <= c) {
                    out.prices[(t, i)] = p;
                    out.missing[(t, i)] = false;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Daily,
    Weekly,
}

/// Log-returns on a date axis. Column-major storage, so each series is a
/// contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    labels: Vec<SeriesLabel>,
    returns: DMatrix<f64>,
    frequency: Frequency,
}

impl ReturnPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        labels: Vec<SeriesLabel>,
        returns: DMatrix<f64>,
        frequency: Frequency,
    ) -> Result<Self> {
        if returns.shape() != (dates.len(), labels.len()) {
            return Err(Error::invalid(format!(
                "return matrix {:?} does not match {} dates x {} labels",
                returns.shape(),
                dates.len(),
                labels.len()
            )));
        }
        check_dates(&dates)?;
        check_unique(labels.iter())?;
        if let Some(i) = (0..labels.len()).find(|&i| returns.column(i).iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid(format!("series {} has non-finite returns", labels[i])));
        }
        Ok(Self { dates, labels, returns, frequency })
    }

    /// Builds a daily panel from columns, dating rows `0..T` from an arbitrary
    /// weekday epoch. Meant for synthetic and test data.
    pub fn from_columns(labels: Vec<SeriesLabel>, columns: &[Vec<f64>]) -> Result<Self> {
        let n_t = columns.first().map_or(0, Vec::len);
        if columns.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), found: columns.len() });
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n_t) {
            return Err(Error::DimensionMismatch { expected: n_t, found: c.len() });
        }
        let returns = DMatrix::from_fn(n_t, labels.len(), |t, i| columns[i][t]);
        Self::new(business_days(n_t), labels, returns, Frequency::Daily)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn labels(&self) -> &[SeriesLabel] {
        &self.labels
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.labels.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let n_t = self.n_rows();
        &self.returns.as_slice()[i * n_t..(i + 1) * n_t]
    }

    pub fn index_of(&self, label: &SeriesLabel) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Rows dated within `[start, end]`, both inclusive.
    pub fn between(&self, start: Option<NaiveDate>, end: Option<NaiveDate>) -> Result<Self> {
        let rows: Vec<usize> = (0..self.n_rows())
            .filter(|&t| {
                let d = self.dates[t];
                start.is_none_or(|s| d >= s) && end.is_none_or(|e| d <= e)
            })
            .collect();
        self.keep_rows(&rows)
    }

    fn keep_rows(&self, rows: &[usize]) -> Result<Self> {
        let returns = DMatrix::from_fn(rows.len(), self.n_series(), |r, i| self.returns[(rows[r], i)]);
        Self::new(
            rows.iter().map(|&t| self.dates[t]).collect(),
            self.labels.clone(),
            returns,
            self.frequency,
        )
    }

    /// Keeps the listed columns in the given order.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        let returns = DMatrix::from_fn(self.n_rows(), columns.len(), |t, c| self.returns[(t, columns[c])]);
        Self::new(
            self.dates.clone(),
            columns.iter().map(|&c| self.labels[c].clone()).collect(),
            returns,
            self.frequency,
        )
    }

    pub(crate) fn with_returns(&self, returns: DMatrix<f64>) -> Result<Self> {
        Self::new(self.dates.clone(), self.labels.clone(), returns, self.frequency)
    }
}

/// Consecutive weekdays starting Monday 2001-01-01.
pub fn business_days(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2001, 1, 1).expect("valid epoch");
    start
        .iter_days()
        .filter(|d| d.weekday().number_from_monday() <= 5)
        .take(n)
        .collect()
}

/// Daily log-returns `ln P[t+1] - ln P[t]`, dated at the later close.
pub fn log_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    if panel.has_gaps() {
        return Err(Error::invalid("price panel has missing observations; align calendars first"));
    }
    if panel.n_dates() < 2 {
        return Err(Error::invalid("log-returns need at least two dates"));
    }
    let n_t = panel.n_dates() - 1;
    let logs = panel.prices.map(f64::ln);
    let returns = DMatrix::from_fn(n_t, panel.n_series(), |t, i| logs[(t + 1, i)] - logs[(t, i)]);
    ReturnPanel::new(
        panel.dates[1..].to_vec(),
        panel.labels.iter().map(SeriesLabel::new).collect(),
        returns,
        Frequency::Daily,
    )
}

/// Averages daily returns within each ISO-8601 week (Monday start). Each
/// weekly row is dated at the last trading day of its week.
pub fn weekly_average(panel: &ReturnPanel) -> Result<ReturnPanel> {
    if panel.frequency == Frequency::Weekly {
        return Err(Error::invalid("panel is already weekly"));
    }
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for t in 1..=panel.n_rows() {
        if t == panel.n_rows() || panel.dates[t].iso_week() != panel.dates[start].iso_week() {
            groups.push((start, t));
            start = t;
        }
    }
    if panel.n_rows() == 0 {
        groups.clear();
    }
    let returns = DMatrix::from_fn(groups.len(), panel.n_series(), |w, i| {
        let (a, b) = groups[w];
        let col = &panel.column(i)[a..b];
        col.iter().sum::<f64>() / col.len() as f64
    });
    ReturnPanel::new(
        groups.iter().map(|&(_, b)| panel.dates[b - 1]).collect(),
        panel.labels.clone(),
        returns,
        Frequency::Weekly,
    )
}
