use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::AssetGraph;
use crate::error::{Error, Result};
use crate::label::SeriesLabel;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScores {
    pub label: SeriesLabel,
    pub degree: usize,
    pub eigenvector: f64,
    pub betweenness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rankings {
    pub degree: Vec<SeriesLabel>,
    pub eigenvector: Vec<SeriesLabel>,
    pub betweenness: Vec<SeriesLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityReport {
    pub nodes: Vec<NodeScores>,
    /// Leading adjacency eigenvalue of the component scored by eigenvector
    /// centrality.
    pub leading_eigenvalue: f64,
    pub rankings: Rankings,
}

impl CentralityReport {
    pub fn scores(&self, label: &SeriesLabel) -> Option<&NodeScores> {
        self.nodes.iter().find(|n| &n.label == label)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

pub fn centralities(graph: &AssetGraph) -> Result<CentralityReport> {
    if graph.is_empty() {
        return Err(Error::invalid("centralities need a non-empty graph"));
    }
    let adj = graph.adjacency()?;
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let (eig, leading_eigenvalue) = eigenvector_centrality(&adj, &graph.nodes)?;
    let btw = betweenness(&adj);
    let nodes: Vec<NodeScores> = (0..adj.len())
        .map(|i| NodeScores {
            label: graph.nodes[i].clone(),
            degree: degree[i],
            eigenvector: eig[i],
            betweenness: btw[i],
        })
        .collect();
    let rank = |score: &dyn Fn(&NodeScores) -> f64| {
        let mut order: Vec<&NodeScores> = nodes.iter().collect();
        order.sort_by(|a, b| {
            score(b)
                .total_cmp(&score(a))
                .then_with(|| a.label.to_string().cmp(&b.label.to_string()))
        });
        order.into_iter().map(|n| n.label.clone()).collect()
    };
    let rankings = Rankings {
        degree: rank(&|n| n.degree as f64),
        eigenvector: rank(&|n| n.eigenvector),
        betweenness: rank(&|n| n.betweenness),
    };
    Ok(CentralityReport { nodes, leading_eigenvalue, rankings })
}

/// Connected components, each listed in ascending node order.
fn components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    let mut out = Vec::new();
    for start in 0..adj.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Principal adjacency eigenvector of the largest connected component (ties
/// go to the component holding the lexicographically first label), unit
/// Euclidean norm; nodes outside it score 0. Iterates on `A + I`, which has
/// the same eigenvectors but no ±λ pair at the top for bipartite graphs.
pub fn eigenvector_centrality(adj: &[Vec<usize>], labels: &[SeriesLabel]) -> Result<(Vec<f64>, f64)> {
    let n = adj.len();
    let mut scores = vec![0.0; n];
    let comps = components(adj);
    let Some(comp) = comps.iter().max_by(|a, b| {
        let first = |c: &Vec<usize>| c.iter().map(|&i| labels[i].to_string()).min().unwrap_or_default();
        a.len().cmp(&b.len()).then_with(|| first(b).cmp(&first(a)))
    }) else {
        return Ok((scores, 0.0));
    };

    let mut v = vec![0.0; n];
    for &i in comp {
        v[i] = 1.0 / (comp.len() as f64).sqrt();
    }
    let mut next = vec![0.0; n];
    for _ in 0..POWER_MAX_ITER {
        for &i in comp {
            next[i] = v[i] + adj[i].iter().map(|&j| v[j]).sum::<f64>();
        }
        let norm = comp.iter().map(|&i| next[i] * next[i]).sum::<f64>().sqrt();
        let mut delta = 0.0f64;
        for &i in comp {
            next[i] /= norm;
            delta = delta.max((next[i] - v[i]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if delta < POWER_TOL {
            let lambda = comp
                .iter()
                .map(|&i| v[i] * adj[i].iter().map(|&j| v[j]).sum::<f64>())
                .sum::<f64>();
            for &i in comp {
                scores[i] = v[i].max(0.0);
            }
            return Ok((scores, lambda));
        }
    }
    Err(Error::NoConvergence { what: "eigenvector centrality power iteration", iterations: POWER_MAX_ITER })
}

/// Shortest-path betweenness on an unweighted undirected graph: for every
/// unordered pair `{s, t}` a node on the shortest `s`–`t` paths earns the
/// fraction of those paths passing through it. Endpoints earn nothing and
/// the counts are not normalised.
pub fn betweenness(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut score = vec![0.0; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut stack = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);

    for s in 0..n {
        sigma.fill(0.0);
        dist.fill(usize::MAX);
        delta.fill(0.0);
        preds.iter_mut().for_each(Vec::clear);
        stack.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                score[w] += delta[w];
            }
        }
    }
    // each unordered pair was visited from both ends
    score.iter_mut().for_each(|x| *x /= 2.0);
    score
}
