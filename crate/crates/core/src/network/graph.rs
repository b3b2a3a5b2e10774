use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::DistanceMatrix;
use crate::error::{Error, Result};
use crate::label::SeriesLabel;
use crate::panel::io::fmt_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: SeriesLabel,
    pub target: SeriesLabel,
    pub distance: f64,
}

/// Undirected graph keeping exactly the pairs closer than `threshold`.
/// Series with no such partner are not nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetGraph {
    pub threshold: f64,
    pub nodes: Vec<SeriesLabel>,
    pub edges: Vec<Edge>,
}

pub fn asset_graph(dist: &DistanceMatrix, threshold: f64) -> Result<AssetGraph> {
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(Error::invalid(format!("threshold must be non-negative, got {threshold}")));
    }
    let n = dist.len();
    let mut touched = vec![false; n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist.values[(i, j)];
            if d < threshold {
                touched[i] = true;
                touched[j] = true;
                edges.push(Edge { source: dist.labels[i].clone(), target: dist.labels[j].clone(), distance: d });
            }
        }
    }
    let nodes = (0..n).filter(|&i| touched[i]).map(|i| dist.labels[i].clone()).collect();
    Ok(AssetGraph { threshold, nodes, edges })
}

impl AssetGraph {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Neighbour lists indexed like `nodes`, each sorted ascending.
    pub fn adjacency(&self) -> Result<Vec<Vec<usize>>> {
        let index: HashMap<&SeriesLabel, usize> = self.nodes.iter().enumerate().map(|(i, l)| (l, i)).collect();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let a = *index.get(&e.source).ok_or_else(|| Error::UnknownLabel(e.source.to_string()))?;
            let b = *index.get(&e.target).ok_or_else(|| Error::UnknownLabel(e.target.to_string()))?;
            if a == b {
                return Err(Error::invalid(format!("self-loop on {}", e.source)));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(adj)
    }

    pub fn write_edge_list<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "target", "distance"])?;
        for e in &self.edges {
            w.write_record([e.source.to_string(), e.target.to_string(), fmt_f64(e.distance)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}
