//! Reductions from other problems to grouped least squares instances.

mod clustering;
mod fidelity;
mod graph;
mod mincut;
mod shortest_path;

pub use clustering::{clustering_instance, parse_points, solve_clustering, ClusteringEncoding, PointSet};
pub use fidelity::{l1_expand, l22_fidelity_solve, l22_objective, MAX_SEARCH_ITERS};
pub use graph::{parse_graph, serialize_graph, WeightedGraph};
pub use mincut::{mincut_instance, Cut, MinCutEncoding};
pub use shortest_path::{default_penalty, shortest_path_instance, ShortestPathEncoding};
