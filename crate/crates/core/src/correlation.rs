//! Pearson and Spearman correlation matrices, lag augmentation, and lagged
//! cross-correlation profiles.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::SeriesLabel;
use crate::panel::{Frequency, ReturnPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Pearson,
    Spearman,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(Method::Pearson),
            "spearman" => Ok(Method::Spearman),
            other => Err(Error::invalid(format!("unknown correlation method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<SeriesLabel>,
    pub method: Method,
    pub sample_size: usize,
    #[serde(with = "rows")]
    pub values: DMatrix<f64>,
}

/// Serializes a square matrix as an array of rows.
pub(crate) mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }
}

impl CorrelationMatrix {
    /// Validates and wraps an externally supplied matrix.
    pub fn new(labels: Vec<SeriesLabel>, values: DMatrix<f64>, method: Method, sample_size: usize) -> Result<Self> {
        let n = labels.len();
        if values.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: values.nrows() });
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let v = values[(i, j)];
                if !(v.abs() <= 1.0 + 1e-12) {
                    return Err(Error::CorrelationOutOfRange { value: v });
                }
                worst = worst.max((v - values[(j, i)]).abs());
            }
            if (values[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("diagonal entry {i} is {}, not 1", values[(i, i)])));
            }
        }
        if worst > 1e-9 {
            return Err(Error::Asymmetric(worst));
        }
        Ok(Self { labels, method, sample_size, values })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, a: &SeriesLabel, b: &SeriesLabel) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[(i, j)])
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        crate::grid::write_labeled_matrix(&self.labels, &self.values, out)
    }
}

/// Mean-centered column scaled to unit Euclidean norm, or `None` when the
/// column is constant.
pub(crate) fn unit_deviations(col: &[f64]) -> Option<Vec<f64>> {
    if col.iter().all(|&v| v == col[0]) {
        return None;
    }
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    let dev: Vec<f64> = col.iter().map(|&v| v - mean).collect();
    let norm = dev.iter().map(|d| d * d).sum::<f64>().sqrt();
    (norm > 0.0).then(|| dev.into_iter().map(|d| d / norm).collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Midranks (1-based): tied values share the average of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Product-moment correlation of two equal-length samples.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let ux = unit_deviations(x)?;
    let uy = unit_deviations(y)?;
    Some(dot(&ux, &uy).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&midranks(x), &midranks(y))
}

fn correlate(x: &[f64], y: &[f64], method: Method) -> Option<f64> {
    match method {
        Method::Pearson => pearson(x, y),
        Method::Spearman => spearman(x, y),
    }
}

/// Unit-deviation columns of the panel (ranked first for Spearman).
pub(crate) fn standardized_columns(panel: &ReturnPanel, method: Method) -> Result<Vec<Vec<f64>>> {
    (0..panel.n_series())
        .map(|i| {
            let col = panel.column(i);
            let prepared = match method {
                Method::Pearson => unit_deviations(col),
                Method::Spearman => unit_deviations(&midranks(col)),
            };
            prepared.ok_or_else(|| Error::ZeroVariance(panel.labels()[i].to_string()))
        })
        .collect()
}

/// Gram matrix of unit columns with an exact unit diagonal. Pairs are
/// independent, so the result does not depend on the thread schedule.
pub(crate) fn gram(columns: &[Vec<f64>]) -> DMatrix<f64> {
    let n = columns.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| dot(&columns[i], &columns[j]).clamp(-1.0, 1.0)).collect())
        .collect();
    let mut m = DMatrix::identity(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + 1 + k;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn correlation_matrix(panel: &ReturnPanel, method: Method) -> Result<CorrelationMatrix> {
    if panel.n_rows() < 3 {
        return Err(Error::invalid(format!("correlation needs at least 3 rows, got {}", panel.n_rows())));
    }
    let cols = standardized_columns(panel, method)?;
    Ok(CorrelationMatrix {
        labels: panel.labels().to_vec(),
        method,
        sample_size: panel.n_rows(),
        values: gram(&cols),
    })
}

pub fn pearson_matrix(panel: &ReturnPanel) -> Result<CorrelationMatrix> {
    correlation_matrix(panel, Method::Pearson)
}

/// Pearson correlation of the column ranks, ties averaged.
pub fn spearman_matrix(panel: &ReturnPanel) -> Result<CorrelationMatrix> {
    correlation_matrix(panel, Method::Spearman)
}

/// Appends lagged copies of every series. Columns are grouped by lag: all
/// lag-0 series first, then all lag-1 copies, and so on. The lag-`l` copy at
/// row `t` holds the original value at row `t - l`; the first `max_lag` rows,
/// where some copy is undefined, are dropped.
pub fn lag_augment(panel: &ReturnPanel, max_lag: usize) -> Result<ReturnPanel> {
    if panel.frequency() != Frequency::Daily {
        return Err(Error::invalid("lag augmentation expects a daily panel"));
    }
    if max_lag == 0 {
        return Ok(panel.clone());
    }
    let n_t = panel.n_rows();
    if max_lag >= n_t {
        return Err(Error::invalid(format!("max lag {max_lag} must be below the row count {n_t}")));
    }
    let n = panel.n_series();
    let out_rows = n_t - max_lag;
    let returns = DMatrix::from_fn(out_rows, n * (max_lag + 1), |r, c| {
        let (lag, i) = (c / n, c % n);
        panel.returns()[(r + max_lag - lag, i)]
    });
    let labels = (0..=max_lag)
        .flat_map(|lag| {
            panel
                .labels()
                .iter()
                .map(move |l| SeriesLabel::lagged(l.name.clone(), l.lag + lag))
        })
        .collect();
    ReturnPanel::new(panel.dates()[max_lag..].to_vec(), labels, returns, Frequency::Daily)
}

/// Correlation between a reference series at `t` and a target at `t + lag`.
/// Negative lags mean the target precedes the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagProfile {
    pub reference: SeriesLabel,
    pub target: SeriesLabel,
    pub lags: Vec<i64>,
    pub correlations: Vec<f64>,
}

impl LagProfile {
    pub fn at(&self, lag: i64) -> Option<f64> {
        self.lags.iter().position(|&l| l == lag).map(|k| self.correlations[k])
    }
}

/// Correlation of `x[t]` with `y[t + lag]` over the overlapping window.
pub fn lagged_correlation(x: &[f64], y: &[f64], lag: i64, method: Method) -> Result<f64> {
    let n = x.len().min(y.len());
    let shift = lag.unsigned_abs() as usize;
    if shift + 2 > n {
        return Err(Error::invalid(format!("lag {lag} leaves no overlap window of length >= 2")));
    }
    let (xs, ys) = if lag >= 0 {
        (&x[..n - shift], &y[shift..n])
    } else {
        (&x[shift..n], &y[..n - shift])
    };
    correlate(xs, ys, method)
        .ok_or_else(|| Error::invalid(format!("constant series in the overlap window at lag {lag}")))
}

pub fn cross_correlation(
    panel: &ReturnPanel,
    reference: &SeriesLabel,
    targets: &[SeriesLabel],
    lag_range: (i64, i64),
    method: Method,
) -> Result<Vec<LagProfile>> {
    let (lo, hi) = lag_range;
    if lo > hi {
        return Err(Error::invalid(format!("empty lag range [{lo}, {hi}]")));
    }
    let n_t = panel.n_rows() as i64;
    if hi - lo >= n_t - 2 {
        return Err(Error::invalid(format!(
            "lag range [{lo}, {hi}] too wide for {n_t} rows"
        )));
    }
    let r = panel.index_of(reference)?;
    let x = panel.column(r);
    targets
        .iter()
        .map(|target| {
            let y = panel.column(panel.index_of(target)?);
            let lags: Vec<i64> = (lo..=hi).collect();
            let correlations = lags
                .iter()
                .map(|&lag| lagged_correlation(x, y, lag, method))
                .collect::<Result<_>>()?;
            Ok(LagProfile { reference: reference.clone(), target: target.clone(), lags, correlations })
        })
        .collect()
}
