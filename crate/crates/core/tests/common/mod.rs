#![allow(dead_code)]

use marketlag_core::{ReturnPanel, SeriesLabel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn labels(prefix: &str, n: usize) -> Vec<SeriesLabel> {
    (0..n).map(|i| SeriesLabel::new(format!("{prefix}{i:02}"))).collect()
}

/// Independent standard normal columns.
pub fn gaussian_panel(n: usize, t: usize, seed: u64) -> ReturnPanel {
    let mut r = rng(seed);
    let cols: Vec<Vec<f64>> = (0..n).map(|_| (0..t).map(|_| r.sample(StandardNormal)).collect()).collect();
    ReturnPanel::from_columns(labels("G", n), &cols).unwrap()
}

/// `R_i = loading·F + sqrt(1 - loading²)·ε_i`.
pub fn one_factor_panel(n: usize, t: usize, loading: f64, seed: u64) -> ReturnPanel {
    let mut r = rng(seed);
    let f: Vec<f64> = (0..t).map(|_| r.sample(StandardNormal)).collect();
    let idio = (1.0 - loading * loading).sqrt();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|_| f.iter().map(|&x| loading * x + idio * r.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    ReturnPanel::from_columns(labels("F", n), &cols).unwrap()
}

/// Plain two-pass Pearson, written independently of the library.
pub fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Shortest-path betweenness by enumerating every simple path between each
/// unordered pair and keeping the shortest ones.
pub fn brute_force_betweenness(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut out = vec![0.0; n];
    for s in 0..n {
        for t in (s + 1)..n {
            let mut paths = Vec::new();
            let mut path = vec![s];
            let mut seen = vec![false; n];
            seen[s] = true;
            walk(adj, t, &mut path, &mut seen, &mut paths);
            let Some(best) = paths.iter().map(Vec::len).min() else { continue };
            let shortest: Vec<&Vec<usize>> = paths.iter().filter(|p| p.len() == best).collect();
            for p in &shortest {
                for &v in &p[1..p.len() - 1] {
                    out[v] += 1.0 / shortest.len() as f64;
                }
            }
        }
    }
    out
}

fn walk(adj: &[Vec<usize>], target: usize, path: &mut Vec<usize>, seen: &mut [bool], paths: &mut Vec<Vec<usize>>) {
    let v = *path.last().unwrap();
    if v == target {
        paths.push(path.clone());
        return;
    }
    for &w in &adj[v] {
        if !seen[w] {
            seen[w] = true;
            path.push(w);
            walk(adj, target, path, seen, paths);
            path.pop();
            seen[w] = false;
        }
    }
}

/// Erdős–Rényi graph as adjacency lists.
pub fn random_graph(n: usize, p: f64, r: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random::<f64>() < p {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

pub fn euclidean_distances(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    DMatrix::from_fn(n, n, |i, j| (points.row(i) - points.row(j)).norm())
}

/// Residual `||X - Y R||_F / ||X||_F` after centring both and rotating `Y`
/// onto `X` with the optimal orthogonal `R` (reflections allowed).
pub fn procrustes_residual(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let centre = |m: &DMatrix<f64>| {
        let mean = m.row_mean();
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - mean[j])
    };
    let (xc, yc) = (centre(x), centre(y));
    let svd = (yc.transpose() * &xc).svd(true, true);
    let rot = svd.u.unwrap() * svd.v_t.unwrap();
    (&xc - yc * rot).norm() / xc.norm()
}
