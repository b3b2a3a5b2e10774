use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{standardized_columns, CorrelationMatrix, Method};
use crate::error::{Error, Result};
use crate::label::SeriesLabel;
use crate::panel::ReturnPanel;
use crate::spectral::shuffled_gram;

/// `d = sqrt(2 (1 - c))`, mapping correlation 1 to 0 and -1 to 2.
pub fn correlation_distance(c: f64) -> f64 {
    (2.0 * (1.0 - c)).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub labels: Vec<SeriesLabel>,
    #[serde(with = "crate::correlation::rows")]
    pub values: DMatrix<f64>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<SeriesLabel>, values: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if values.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: values.nrows() });
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("distance diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if !(0.0..=2.0 + 1e-12).contains(&v) {
                    return Err(Error::invalid(format!("distance {v} outside [0, 2]")));
                }
                if (v - values[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Asymmetric((v - values[(j, i)]).abs()));
                }
            }
        }
        Ok(Self { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        crate::grid::write_labeled_matrix(&self.labels, &self.values, out)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let (labels, values) = crate::grid::read_labeled_matrix(input)?;
        Self::new(labels.iter().map(|l| SeriesLabel::from(l.as_str())).collect(), values)
    }
}

pub fn distance_matrix(corr: &CorrelationMatrix) -> Result<DistanceMatrix> {
    let n = corr.dim();
    if let Some(&bad) = corr.values.iter().find(|v| !(v.abs() <= 1.0 + 1e-12)) {
        return Err(Error::CorrelationOutOfRange { value: bad });
    }
    let values = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            correlation_distance(corr.values[(i, j)].clamp(-1.0, 1.0))
        }
    });
    Ok(DistanceMatrix { labels: corr.labels.clone(), values })
}

/// Smallest pairwise distance seen across `n_sims` column-shuffled copies of
/// the panel: distances above it are indistinguishable from noise.
pub fn noise_distance_threshold(panel: &ReturnPanel, n_sims: usize, seed: u64, method: Method) -> Result<f64> {
    if n_sims == 0 {
        return Err(Error::invalid("noise threshold needs at least one simulation"));
    }
    if panel.n_series() < 2 || panel.n_rows() < 3 {
        return Err(Error::invalid("noise threshold needs at least two series and three rows"));
    }
    let prepared = standardized_columns(panel, method)?;
    let n = prepared.len();
    let max_corr = (0..n_sims as u64)
        .into_par_iter()
        .map(|s| {
            let g = shuffled_gram(&prepared, seed, s);
            let mut best = f64::NEG_INFINITY;
            for j in 0..n {
                for i in 0..j {
                    best = best.max(g[(i, j)]);
                }
            }
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(correlation_distance(max_corr))
}
