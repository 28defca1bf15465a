//! Mantegna distances, minimum spanning trees and tree topology indicators.

pub mod distance;
pub mod indicators;
pub mod tree;

pub use distance::{mantegna_distance, DistanceMatrix};
pub use indicators::{
    apl, assortativity, betweenness, build_tree_series, closeness, degree_distribution, degree_frequencies, diameter,
    indicator_series, max_degree, power_law_alpha, rce, tree_indicators, vertex_strength, IndicatorFrame, NodeMeans,
    Strength, TreeIndicators, TreeSeries, RCE_DEFAULT_K, RECIPROCAL_CAP, SCALAR_COLUMNS,
};
pub use tree::{kruskal_mst, Edge, Tree, UnionFind};
