//! Eigen-analysis of correlation matrices against shuffle and Marčenko–Pastur
//! nulls, and market-mode removal by regression.

use std::io::Write;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{self, gram, standardized_columns, CorrelationMatrix, Method};
use crate::error::{Error, Result};
use crate::label::SeriesLabel;
use crate::marchenko_pastur::MarchenkoPastur;
use crate::panel::ReturnPanel;
use crate::rng;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseClass {
    AboveNoise,
    Noise,
    BelowNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub labels: Vec<SeriesLabel>,
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// `None` until compared against a null ensemble.
    pub classification: Option<Vec<NoiseClass>>,
    /// Column `k` pairs with `eigenvalues[k]`.
    #[serde(with = "columns")]
    pub eigenvectors: DMatrix<f64>,
}

/// Serializes a matrix as an array of its columns.
mod columns {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let cols: Vec<Vec<f64>> = m.column_iter().map(|c| c.iter().copied().collect()).collect();
        cols.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let cols = Vec::<Vec<f64>>::deserialize(d)?;
        let n = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n) {
            return Err(serde::de::Error::custom("ragged eigenvector columns"));
        }
        Ok(DMatrix::from_fn(n, cols.len(), |i, k| cols[k][i]))
    }
}

impl SpectralSummary {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k).iter().copied().collect()
    }

    pub fn count(&self, class: NoiseClass) -> usize {
        self.classification
            .as_ref()
            .map_or(0, |c| c.iter().filter(|&&x| x == class).count())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending, each eigenvector
/// flipped so that its largest-magnitude component is positive.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::NoConvergence { what: "symmetric eigendecomposition", iterations: EIGEN_MAX_ITER })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        // first index wins among equal magnitudes
        let pivot = (0..n).fold(0, |best, i| if col[i].abs() > col[best].abs() { i } else { best });
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(dst, &(col * sign));
    }
    Ok((values, vectors))
}

/// Eigenvalues only, descending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn eigendecompose(matrix: &CorrelationMatrix) -> Result<SpectralSummary> {
    let m = &matrix.values;
    let n = m.nrows();
    if m.ncols() != n || matrix.labels.len() != n {
        return Err(Error::DimensionMismatch { expected: matrix.labels.len(), found: n });
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > 1e-9 {
        return Err(Error::Asymmetric(worst));
    }
    let (eigenvalues, eigenvectors) = symmetric_eigen(m)?;
    Ok(SpectralSummary { labels: matrix.labels.clone(), eigenvalues, classification: None, eigenvectors })
}

/// Eigenvalue spectra of column-shuffled copies of a panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullEnsemble {
    pub n_sims: usize,
    pub seed: u64,
    pub method: Method,
    pub sample_size: usize,
    /// Row `s` holds the descending spectrum of simulation `s`.
    #[serde(with = "crate::correlation::rows")]
    pub samples: DMatrix<f64>,
    /// Per-rank `(min, max)` across simulations.
    pub envelope: Vec<(f64, f64)>,
    /// `None` when `T <= N`.
    pub mp_bounds: Option<(f64, f64)>,
}

impl NullEnsemble {
    pub fn dim(&self) -> usize {
        self.envelope.len()
    }

    pub fn global_min(&self) -> f64 {
        self.envelope.iter().map(|e| e.0).fold(f64::INFINITY, f64::min)
    }

    pub fn global_max(&self) -> f64 {
        self.envelope.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// All simulated eigenvalues, for histograms.
    pub fn pooled(&self) -> Vec<f64> {
        self.samples.iter().copied().collect()
    }

    pub fn write_envelope_csv<W: Write>(&self, observed: Option<&[f64]>, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "observed", "null_min", "null_max", "mp_lower", "mp_upper"])?;
        let (mp_lo, mp_hi) = self
            .mp_bounds
            .map(|(a, b)| (fmt(a), fmt(b)))
            .unwrap_or_default();
        for (k, (lo, hi)) in self.envelope.iter().enumerate() {
            let obs = observed.and_then(|o| o.get(k)).map(|&v| fmt(v)).unwrap_or_default();
            w.write_record([(k + 1).to_string(), obs, fmt(*lo), fmt(*hi), mp_lo.clone(), mp_hi.clone()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    crate::panel::io::fmt_f64(v)
}

fn permute_columns<R: Rng>(columns: &mut [Vec<f64>], rng: &mut R) {
    for c in columns.iter_mut() {
        c.shuffle(rng);
    }
}

/// Copy of the panel with each column independently permuted in time, drawn
/// from stream `sim` of `seed`.
pub fn shuffle_panel(panel: &ReturnPanel, seed: u64, sim: u64) -> Result<ReturnPanel> {
    let mut cols: Vec<Vec<f64>> = (0..panel.n_series()).map(|i| panel.column(i).to_vec()).collect();
    permute_columns(&mut cols, &mut rng::stream(seed, sim));
    let n_t = panel.n_rows();
    panel.with_returns(DMatrix::from_fn(n_t, cols.len(), |t, i| cols[i][t]))
}

/// Correlation matrix of one shuffled realisation. Permutation commutes with
/// standardisation and ranking, so the prepared columns are shuffled directly.
pub(crate) fn shuffled_gram(prepared: &[Vec<f64>], seed: u64, sim: u64) -> DMatrix<f64> {
    let mut cols = prepared.to_vec();
    permute_columns(&mut cols, &mut rng::stream(seed, sim));
    gram(&cols)
}

/// Runs `n_sims` shuffles. Simulation `s` draws from stream `s` of `seed`,
/// so the ensemble is identical however the work is scheduled.
pub fn shuffle_null(panel: &ReturnPanel, n_sims: usize, seed: u64, method: Method) -> Result<NullEnsemble> {
    if n_sims == 0 {
        return Err(Error::invalid("null ensemble needs at least one simulation"));
    }
    if panel.n_rows() < 3 {
        return Err(Error::invalid("null ensemble needs at least 3 rows"));
    }
    let prepared = standardized_columns(panel, method)?;
    let n = prepared.len();
    let spectra: Vec<Vec<f64>> = (0..n_sims as u64)
        .into_par_iter()
        .map(|s| symmetric_eigenvalues(&shuffled_gram(&prepared, seed, s)))
        .collect();
    let samples = DMatrix::from_fn(n_sims, n, |s, k| spectra[s][k]);
    let envelope = (0..n)
        .map(|k| {
            let col = samples.column(k);
            (col.min(), col.max())
        })
        .collect();
    let mp_bounds = MarchenkoPastur::for_panel(panel.n_rows(), n).ok().map(|mp| mp.bounds());
    Ok(NullEnsemble { n_sims, seed, method, sample_size: panel.n_rows(), samples, envelope, mp_bounds })
}

/// Labels each eigenvalue against the null's global extrema.
pub fn classify_eigenvalues(summary: &SpectralSummary, null: &NullEnsemble) -> Result<SpectralSummary> {
    if summary.dim() != null.dim() {
        return Err(Error::DimensionMismatch { expected: summary.dim(), found: null.dim() });
    }
    let (lo, hi) = (null.global_min(), null.global_max());
    let classes = summary
        .eigenvalues
        .iter()
        .map(|&v| classify(v, lo, hi))
        .collect();
    Ok(SpectralSummary { classification: Some(classes), ..summary.clone() })
}

pub fn classify(value: f64, null_min: f64, null_max: f64) -> NoiseClass {
    if value > null_max {
        NoiseClass::AboveNoise
    } else if value < null_min {
        NoiseClass::BelowNoise
    } else {
        NoiseClass::Noise
    }
}

/// Portfolio return `I_t = Σ_i w_i R_{t,i}` with the weights used as given.
pub fn market_mode_series(panel: &ReturnPanel, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != panel.n_series() {
        return Err(Error::DimensionMismatch { expected: panel.n_series(), found: weights.len() });
    }
    Ok((panel.returns() * nalgebra::DVector::from_column_slice(weights)).iter().copied().collect())
}

/// Per-series regression `R = a + b·I + E` on a mode series.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeRemovalResult {
    pub mode_series: Vec<f64>,
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub residuals: ReturnPanel,
}

pub fn remove_mode(panel: &ReturnPanel, mode: &[f64]) -> Result<ModeRemovalResult> {
    let n_t = panel.n_rows();
    if mode.len() != n_t {
        return Err(Error::DimensionMismatch { expected: n_t, found: mode.len() });
    }
    if n_t < 2 || mode.iter().all(|&v| v == mode[0]) {
        return Err(Error::invalid("mode series has zero variance"));
    }
    let mean_i = mode.iter().sum::<f64>() / n_t as f64;
    let dev_i: Vec<f64> = mode.iter().map(|&v| v - mean_i).collect();
    let ss_i = correlation::dot(&dev_i, &dev_i);
    if ss_i == 0.0 {
        return Err(Error::invalid("mode series has zero variance"));
    }
    let n = panel.n_series();
    let mut slopes = Vec::with_capacity(n);
    let mut intercepts = Vec::with_capacity(n);
    let mut residuals = DMatrix::zeros(n_t, n);
    for i in 0..n {
        let col = panel.column(i);
        let mean_r = col.iter().sum::<f64>() / n_t as f64;
        let dev_r: Vec<f64> = col.iter().map(|&v| v - mean_r).collect();
        let b = correlation::dot(&dev_r, &dev_i) / ss_i;
        let a = mean_r - b * mean_i;
        for t in 0..n_t {
            // centred form keeps the residual mean at rounding level
            residuals[(t, i)] = dev_r[t] - b * dev_i[t];
        }
        slopes.push(b);
        intercepts.push(a);
    }
    Ok(ModeRemovalResult {
        mode_series: mode.to_vec(),
        slopes,
        intercepts,
        residuals: panel.with_returns(residuals)?,
    })
}

/// One round of iterated mode removal.
#[derive(Debug, Clone)]
pub struct RemovalRound {
    /// Spectrum of the panel the mode was taken from.
    pub spectrum: SpectralSummary,
    pub removal: ModeRemovalResult,
    /// Residual panel after re-standardisation; constant columns dropped.
    pub standardized_residuals: ReturnPanel,
    pub residual_correlation: CorrelationMatrix,
}

/// Rescales each column to zero mean and unit sample variance. Columns whose
/// spread is negligible relative to `reference` (perfectly explained series)
/// are dropped with a warning.
pub fn restandardize(panel: &ReturnPanel, reference: Option<&ReturnPanel>) -> Result<ReturnPanel> {
    let n_t = panel.n_rows();
    let sd = |col: &[f64]| {
        let m = col.iter().sum::<f64>() / col.len() as f64;
        (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64).sqrt()
    };
    let mut keep = Vec::new();
    for i in 0..panel.n_series() {
        let s = sd(panel.column(i));
        let scale = reference
            .and_then(|r| r.index_of(&panel.labels()[i]).ok().map(|j| sd(r.column(j))))
            .unwrap_or(1.0);
        if s > 1e-12 * scale.max(f64::MIN_POSITIVE) && s.is_finite() {
            keep.push(i);
        } else {
            warn!("dropping series {} with constant residual after mode removal", panel.labels()[i]);
        }
    }
    let kept = panel.select(&keep)?;
    let mut out = kept.returns().clone();
    for (c, mut col) in out.column_iter_mut().enumerate() {
        let src = kept.column(c);
        let m = src.iter().sum::<f64>() / n_t as f64;
        let s = sd(src);
        col.iter_mut().zip(src).for_each(|(o, v)| *o = (v - m) / s);
    }
    kept.with_returns(out)
}

/// Removes the `rounds` leading collective modes one at a time: take the
/// top eigenvector of the current panel's correlation matrix, regress every
/// series on its portfolio, re-standardise the residuals and repeat.
pub fn remove_top_modes(panel: &ReturnPanel, rounds: usize, method: Method) -> Result<Vec<RemovalRound>> {
    let mut current = panel.clone();
    let mut out = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let corr = correlation::correlation_matrix(&current, method)?;
        let spectrum = eigendecompose(&corr)?;
        let mode = market_mode_series(&current, &spectrum.eigenvector(0))?;
        let removal = remove_mode(&current, &mode)?;
        let standardized = restandardize(&removal.residuals, Some(&current))?;
        if standardized.n_series() < 2 {
            return Err(Error::invalid("fewer than two series survive mode removal"));
        }
        let residual_correlation = correlation::correlation_matrix(&standardized, method)?;
        current = standardized.clone();
        out.push(RemovalRound { spectrum, removal, standardized_residuals: standardized, residual_correlation });
    }
    Ok(out)
}

/// Eigenvalue histogram with the Marčenko–Pastur density at bin centres.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Normalised counts (integrates to 1 over the binned range).
    pub density: Vec<f64>,
    pub mp_density: Option<Vec<f64>>,
}

pub fn histogram(values: &[f64], bins: usize, range: (f64, f64), mp: Option<&MarchenkoPastur>) -> Result<Histogram> {
    let (lo, hi) = range;
    if bins == 0 || !(hi > lo) {
        return Err(Error::invalid(format!("bad histogram spec: {bins} bins over [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v >= lo && v <= hi {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let total = counts.iter().sum::<usize>().max(1) as f64;
    let density = counts.iter().map(|&c| c as f64 / (total * width)).collect();
    let mp_density = mp.map(|mp| (0..bins).map(|k| mp.density(lo + width * (k as f64 + 0.5))).collect());
    Ok(Histogram { edges, counts, density, mp_density })
}

impl Histogram {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lower", "bin_upper", "count", "density", "mp_density"])?;
        for k in 0..self.counts.len() {
            w.write_record([
                fmt(self.edges[k]),
                fmt(self.edges[k + 1]),
                self.counts[k].to_string(),
                fmt(self.density[k]),
                self.mp_density.as_ref().map(|m| fmt(m[k])).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
