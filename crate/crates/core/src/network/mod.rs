//! Correlation distances, threshold asset graphs, centralities and
//! low-dimensional embeddings.

mod centrality;
mod distance;
mod graph;
mod mds;

pub use centrality::{betweenness, centralities, eigenvector_centrality, CentralityReport, NodeScores};
pub use distance::{correlation_distance, distance_matrix, noise_distance_threshold, DistanceMatrix};
pub use graph::{asset_graph, AssetGraph, Edge};
pub use mds::{classical_scaling, mds_embed, mds_embed_with, Embedding, MdsOptions};
