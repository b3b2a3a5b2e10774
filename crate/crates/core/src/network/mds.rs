//! Metric multidimensional scaling: classical (Torgerson) initialisation
//! refined by SMACOF majorization of the normalised stress
//! `S = sqrt(Σ (d_ij - e_ij)² / Σ d_ij²)` over pairs `i < j`, where `e_ij`
//! is the embedded Euclidean distance.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use super::DistanceMatrix;
use crate::error::{Error, Result};
use crate::label::SeriesLabel;
use crate::panel::io::fmt_f64;
use crate::rng;
use crate::spectral::symmetric_eigen;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdsOptions {
    pub max_iter: usize,
    /// Stop once `(S_prev - S) / S_prev` falls below this.
    pub rel_tol: f64,
}

impl Default for MdsOptions {
    fn default() -> Self {
        Self { max_iter: 500, rel_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Embedding {
    pub labels: Vec<SeriesLabel>,
    /// One row per label, one column per dimension, centred at the origin.
    #[serde(with = "crate::correlation::rows")]
    pub coordinates: DMatrix<f64>,
    pub stress: f64,
    pub iterations: usize,
    /// Stress of the initial configuration followed by the stress after each
    /// majorization step.
    pub stress_history: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.coordinates.ncols()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let m = self.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["label".to_owned()];
        if m == 2 {
            header.extend(["x".to_owned(), "y".to_owned()]);
        } else {
            header.extend((1..=m).map(|k| format!("x{k}")));
        }
        w.write_record(&header)?;
        for (i, l) in self.labels.iter().enumerate() {
            let mut row = vec![l.to_string()];
            row.extend((0..m).map(|k| fmt_f64(self.coordinates[(i, k)])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn embedded_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| (x.row(i) - x.row(j)).norm())
}

pub(crate) fn stress(target: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let n = target.nrows();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..n {
        for i in 0..j {
            let e = (x.row(i) - x.row(j)).norm();
            num += (target[(i, j)] - e).powi(2);
            den += target[(i, j)].powi(2);
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Torgerson scaling: top `m` eigenpairs of the double-centred squared
/// distances, negative eigenvalues clipped to zero.
pub fn classical_scaling(dist: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    let n = dist.nrows();
    let sq = dist.map(|d| d * d);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let (values, vectors) = symmetric_eigen(&b)?;
    Ok(DMatrix::from_fn(n, m, |i, k| vectors[(i, k)] * values[k].max(0.0).sqrt()))
}

fn center(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}

/// Guttman transform `X' = B(X) X / n` for unit weights.
fn guttman(target: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let e = embedded_distances(x);
    let mut b = DMatrix::from_fn(n, n, |i, j| {
        if i != j && e[(i, j)] > 0.0 {
            -target[(i, j)] / e[(i, j)]
        } else {
            0.0
        }
    });
    for i in 0..n {
        b[(i, i)] = -b.row(i).sum();
    }
    (b * x) / n as f64
}

pub fn mds_embed(dist: &DistanceMatrix, m: usize, seed: u64) -> Result<Embedding> {
    mds_embed_with(dist, m, seed, MdsOptions::default())
}

/// Embeds the distance matrix in `m` dimensions. The seed only matters when
/// classical scaling collapses every point onto the origin, in which case
/// the start is drawn at random.
pub fn mds_embed_with(dist: &DistanceMatrix, m: usize, seed: u64, opts: MdsOptions) -> Result<Embedding> {
    let n = dist.len();
    if m == 0 || m >= n {
        return Err(Error::invalid(format!("embedding dimension {m} must be in 1..{n}")));
    }
    let target = &dist.values;
    let mut x = classical_scaling(target, m)?;
    if x.iter().all(|v| v.abs() < 1e-300) && target.iter().any(|&d| d > 0.0) {
        let mut r = rng::stream(seed, 0);
        x = DMatrix::from_fn(n, m, |_, _| r.random::<f64>() - 0.5);
    }
    center(&mut x);

    let mut current = stress(target, &x);
    let mut history = vec![current];
    let mut iterations = 0;
    while iterations < opts.max_iter && current > 0.0 {
        let next = guttman(target, &x);
        let s = stress(target, &next);
        iterations += 1;
        history.push(s);
        if s > current {
            // majorization cannot increase stress; only rounding gets here
            break;
        }
        x = next;
        let improvement = (current - s) / current;
        current = s;
        if improvement < opts.rel_tol {
            break;
        }
    }
    center(&mut x);
    Ok(Embedding { labels: dist.labels.clone(), coordinates: x, stress: current, iterations, stress_history: history })
}
