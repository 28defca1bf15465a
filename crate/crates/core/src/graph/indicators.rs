//! Topological indicators of a spanning tree.
//!
//! Path-length indicators (APL, diameter) count hops; strength and
//! closeness use edge weights.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

use super::distance::DistanceMatrix;
use super::tree::{kruskal_mst, Tree};
use crate::depnet::TailDepTensor;
use crate::error::{Error, Result};

/// Cap applied to `1 / weight` for zero-length edges.
pub const RECIPROCAL_CAP: f64 = 1e8;
/// Default degree threshold for the rich-club coefficient.
pub const RCE_DEFAULT_K: usize = 4;

/// Degree histogram: degree -> number of nodes.
pub fn degree_distribution(tree: &Tree) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for d in tree.degrees() {
        *hist.entry(d).or_insert(0) += 1;
    }
    hist
}

/// Relative frequencies of [`degree_distribution`].
pub fn degree_frequencies(tree: &Tree) -> BTreeMap<usize, f64> {
    let k = tree.k() as f64;
    degree_distribution(tree)
        .into_iter()
        .map(|(d, c)| (d, c as f64 / k))
        .collect()
}

/// Number of node pairs `(s, t)`, both distinct from `v`, whose tree path
/// passes through `v`.
///
/// Removing `v` splits the tree into components of sizes `n_c`; the pairs
/// through `v` are those with endpoints in different components:
/// `((k - 1)^2 - sum n_c^2) / 2`.
pub fn betweenness(tree: &Tree) -> Vec<u64> {
    let k = tree.k();
    // iterative DFS from node 0 for parent links and subtree sizes
    let mut parent = vec![usize::MAX; k];
    let mut order = Vec::with_capacity(k);
    let mut stack = vec![0usize];
    parent[0] = 0;
    while let Some(v) = stack.pop() {
        order.push(v);
        for &(w, _) in tree.neighbors(v) {
            if parent[w] == usize::MAX {
                parent[w] = v;
                stack.push(w);
            }
        }
    }
    let mut size = vec![1u64; k];
    for &v in order.iter().rev() {
        if v != 0 {
            size[parent[v]] += size[v];
        }
    }
    let n = k as u64;
    (0..k)
        .map(|v| {
            let mut squares = 0u64;
            for &(w, _) in tree.neighbors(v) {
                let comp = if v != 0 && w == parent[v] { n - size[v] } else { size[w] };
                squares += comp * comp;
            }
            ((n - 1) * (n - 1) - squares) / 2
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Strength {
    pub values: Vec<f64>,
    /// True when some incident edge had zero length and its reciprocal was capped.
    pub capped: bool,
}

/// Sum of reciprocal incident edge lengths.
pub fn vertex_strength(tree: &Tree) -> Strength {
    let mut capped = false;
    let values = (0..tree.k())
        .map(|v| {
            tree.neighbors(v)
                .iter()
                .map(|&(_, w)| {
                    if w > 1.0 / RECIPROCAL_CAP {
                        1.0 / w
                    } else {
                        capped = true;
                        RECIPROCAL_CAP
                    }
                })
                .sum()
        })
        .collect();
    Strength { values, capped }
}

/// Inverse of the summed weighted path length to every other node.
pub fn closeness(tree: &Tree) -> Vec<f64> {
    (0..tree.k())
        .map(|v| {
            let total: f64 = tree.distances_from(v).1.iter().sum();
            if total > 1.0 / RECIPROCAL_CAP {
                1.0 / total
            } else {
                RECIPROCAL_CAP
            }
        })
        .collect()
}

fn hop_matrix(tree: &Tree) -> Vec<Vec<usize>> {
    (0..tree.k()).map(|v| tree.distances_from(v).0).collect()
}

/// Mean hop count over unordered node pairs.
pub fn apl(tree: &Tree) -> f64 {
    let k = tree.k();
    let hops = hop_matrix(tree);
    let mut total = 0usize;
    for i in 0..k {
        for j in i + 1..k {
            total += hops[i][j];
        }
    }
    total as f64 / (k * (k - 1) / 2) as f64
}

pub fn max_degree(tree: &Tree) -> usize {
    tree.degrees().into_iter().max().unwrap_or(0)
}

/// Longest path in hops, from two farthest-node sweeps.
pub fn diameter(tree: &Tree) -> usize {
    let far = |src: usize| -> (usize, usize) {
        let (hops, _) = tree.distances_from(src);
        hops.iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, h)| (i, *h))
            .unwrap_or((src, 0))
    };
    let (a, _) = far(0);
    far(a).1
}

/// Discrete power-law exponent by maximum likelihood with `k_min = 1` and a
/// half-unit continuity correction: `1 + n / sum ln(k_i / 0.5)`.
pub fn power_law_alpha(degrees: &[usize]) -> Result<f64> {
    const K_MIN: f64 = 1.0;
    // summed per distinct degree so the result does not depend on node order
    let mut counts = BTreeMap::new();
    for &d in degrees.iter().filter(|&&d| d as f64 >= K_MIN) {
        *counts.entry(d).or_insert(0usize) += 1;
    }
    let n: usize = counts.values().sum();
    let sum: f64 = counts
        .iter()
        .map(|(&d, &c)| c as f64 * (d as f64 / (K_MIN - 0.5)).ln())
        .sum();
    if n == 0 || !(sum > 0.0) {
        return Err(Error::Degenerate("no degrees at or above k_min".into()));
    }
    Ok(1.0 + n as f64 / sum)
}

/// Rich-club coefficient `2 E / (N (N - 1))` over nodes with degree `> k`;
/// zero when fewer than two such nodes exist.
pub fn rce(tree: &Tree, k: usize) -> f64 {
    let deg = tree.degrees();
    let rich = deg.iter().filter(|&&d| d > k).count();
    if rich < 2 {
        return 0.0;
    }
    let links = tree.edges().iter().filter(|e| deg[e.i] > k && deg[e.j] > k).count();
    2.0 * links as f64 / (rich * (rich - 1)) as f64
}

/// Newman degree assortativity: Pearson correlation of end-point degrees
/// over both orientations of every edge. `None` when the end-point degrees
/// have zero variance.
pub fn assortativity(tree: &Tree) -> Option<f64> {
    let deg = tree.degrees();
    let mut xs = Vec::with_capacity(2 * tree.edges().len());
    let mut ys = Vec::with_capacity(2 * tree.edges().len());
    for e in tree.edges() {
        let (a, b) = (deg[e.i] as f64, deg[e.j] as f64);
        xs.extend([a, b]);
        ys.extend([b, a]);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// One tree per date.
#[derive(Debug, Clone)]
pub struct TreeSeries {
    pub dates: Vec<NaiveDate>,
    pub trees: Vec<Tree>,
}

/// Minimum spanning tree of the Mantegna distances at every date.
pub fn build_tree_series(tensor: &TailDepTensor) -> Result<TreeSeries> {
    let trees = (0..tensor.len())
        .into_par_iter()
        .map(|t| {
            let dist = DistanceMatrix::from_tail_dependence(tensor.tickers.clone(), &tensor.matrix(t))?;
            kruskal_mst(&dist)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TreeSeries {
        dates: tensor.dates.clone(),
        trees,
    })
}

/// Scalar and per-node indicators for a single tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeIndicators {
    pub apl: f64,
    pub max_degree: usize,
    pub alpha: Option<f64>,
    pub diameter: usize,
    pub rce: f64,
    pub assortativity: Option<f64>,
    pub degree: Vec<usize>,
    pub betweenness: Vec<u64>,
    pub strength: Vec<f64>,
    pub closeness: Vec<f64>,
    pub strength_capped: bool,
}

pub fn tree_indicators(tree: &Tree, rce_k: usize) -> TreeIndicators {
    let degree = tree.degrees();
    let strength = vertex_strength(tree);
    TreeIndicators {
        apl: apl(tree),
        max_degree: max_degree(tree),
        alpha: power_law_alpha(&degree).ok(),
        diameter: diameter(tree),
        rce: rce(tree, rce_k),
        assortativity: assortativity(tree),
        betweenness: betweenness(tree),
        closeness: closeness(tree),
        strength: strength.values,
        strength_capped: strength.capped,
        degree,
    }
}

/// Indicator time series, one row per tree.
#[derive(Debug, Clone, Serialize)]
pub struct IndicatorFrame {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub rce_k: usize,
    pub rows: Vec<TreeIndicators>,
}

/// Per-node averages over all dates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeMeans {
    pub ticker: String,
    pub degree: f64,
    pub betweenness: f64,
    pub strength: f64,
    pub closeness: f64,
}

/// Names of the per-tree scalar columns, in output order.
pub const SCALAR_COLUMNS: [&str; 6] = ["apl", "max_degree", "alpha", "diameter", "rce", "assortativity"];

impl IndicatorFrame {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// A scalar column by name; `None` entries are undefined values.
    pub fn scalar(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let col = self
            .rows
            .iter()
            .map(|r| match name {
                "apl" => Some(r.apl),
                "max_degree" => Some(r.max_degree as f64),
                "alpha" => r.alpha,
                "diameter" => Some(r.diameter as f64),
                "rce" => Some(r.rce),
                "assortativity" => r.assortativity,
                _ => None,
            })
            .collect();
        SCALAR_COLUMNS.contains(&name).then_some(col)
    }

    pub fn node_means(&self) -> Vec<NodeMeans> {
        let n = self.rows.len().max(1) as f64;
        self.tickers
            .iter()
            .enumerate()
            .map(|(v, ticker)| {
                let mean = |f: &dyn Fn(&TreeIndicators) -> f64| self.rows.iter().map(f).sum::<f64>() / n;
                NodeMeans {
                    ticker: ticker.clone(),
                    degree: mean(&|r| r.degree[v] as f64),
                    betweenness: mean(&|r| r.betweenness[v] as f64),
                    strength: mean(&|r| r.strength[v]),
                    closeness: mean(&|r| r.closeness[v]),
                }
            })
            .collect()
    }
}

/// Evaluate every indicator on every tree of the series.
pub fn indicator_series(trees: &TreeSeries, rce_k: usize) -> Result<IndicatorFrame> {
    let Some(first) = trees.trees.first() else {
        return Err(Error::InvalidData("empty tree series".into()));
    };
    if trees.trees.len() != trees.dates.len() {
        return Err(Error::InvalidData("one tree per date required".into()));
    }
    let tickers = first.nodes().to_vec();
    if trees.trees.iter().any(|t| t.nodes() != tickers.as_slice()) {
        return Err(Error::InvalidData("trees must share the same node labels".into()));
    }
    let rows = trees.trees.par_iter().map(|t| tree_indicators(t, rce_k)).collect();
    Ok(IndicatorFrame {
        dates: trees.dates.clone(),
        tickers,
        rce_k,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tree::Edge;

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("n{i}")).collect()
    }

    fn unit(i: usize, j: usize) -> Edge {
        Edge { i, j, weight: 1.0 }
    }

    pub(crate) fn star(k: usize) -> Tree {
        Tree::new(names(k), (1..k).map(|j| unit(0, j)).collect()).unwrap()
    }

    pub(crate) fn path(k: usize) -> Tree {
        Tree::new(names(k), (1..k).map(|j| unit(j - 1, j)).collect()).unwrap()
    }

    #[test]
    fn degree_histograms() {
        assert_eq!(degree_distribution(&star(5)), BTreeMap::from([(1, 4), (4, 1)]));
        assert_eq!(degree_distribution(&path(4)), BTreeMap::from([(1, 2), (2, 2)]));
        let f = degree_frequencies(&star(5));
        assert!((f[&1] - 0.8).abs() < 1e-15);
        for t in [star(7), path(9)] {
            let h = degree_distribution(&t);
            assert_eq!(h.values().sum::<usize>(), t.k());
            assert_eq!(h.iter().map(|(d, c)| d * c).sum::<usize>(), 2 * (t.k() - 1));
        }
    }

    #[test]
    fn betweenness_examples() {
        assert_eq!(betweenness(&path(3)), vec![0, 1, 0]);
        let n = 7u64;
        let bc = betweenness(&star(n as usize));
        assert_eq!(bc[0], (n - 1) * (n - 2) / 2);
        assert!(bc[1..].iter().all(|&b| b == 0));
        assert_eq!(betweenness(&path(5))[2], 4);
    }

    #[test]
    fn strength_examples() {
        let t = Tree::new(
            names(3),
            vec![
                Edge {
                    i: 0,
                    j: 1,
                    weight: 0.5,
                },
                Edge {
                    i: 1,
                    j: 2,
                    weight: 0.25,
                },
            ],
        )
        .unwrap();
        let s = vertex_strength(&t);
        assert_eq!(s.values, vec![2.0, 6.0, 4.0]);
        assert!(!s.capped);
        assert_eq!(vertex_strength(&path(2)).values, vec![1.0, 1.0]);

        let r2 = std::f64::consts::SQRT_2;
        let t = Tree::new(names(4), (1..4).map(|j| Edge { i: 0, j, weight: r2 }).collect()).unwrap();
        let s = vertex_strength(&t);
        for (v, d) in t.degrees().iter().enumerate() {
            assert!((s.values[v] - *d as f64 / r2).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_length_edges_are_capped() {
        let t = Tree::new(
            names(2),
            vec![Edge {
                i: 0,
                j: 1,
                weight: 0.0,
            }],
        )
        .unwrap();
        let s = vertex_strength(&t);
        assert!(s.capped);
        assert_eq!(s.values, vec![RECIPROCAL_CAP; 2]);
        assert!(closeness(&t).iter().all(|c| c.is_finite()));
    }

    #[test]
    fn closeness_examples() {
        let c = closeness(&path(3));
        assert!((c[1] - 0.5).abs() < 1e-15);
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-15);
        let t = Tree::new(
            names(2),
            vec![Edge {
                i: 0,
                j: 1,
                weight: 0.4,
            }],
        )
        .unwrap();
        assert!(closeness(&t).iter().all(|c| (c - 2.5).abs() < 1e-15));
    }

    #[test]
    fn path_length_examples() {
        assert!((apl(&star(5)) - 1.6).abs() < 1e-15);
        assert!((apl(&path(5)) - 2.0).abs() < 1e-15);
        assert!((apl(&path(2)) - 1.0).abs() < 1e-15);
        assert_eq!(diameter(&path(7)), 6);
        assert_eq!(diameter(&star(7)), 2);
        assert_eq!(max_degree(&star(6)), 5);
        assert_eq!(max_degree(&path(6)), 2);
        assert_eq!(max_degree(&path(2)), 1);
    }

    #[test]
    fn power_law_examples() {
        let sum = 8f64.ln() + 4.0 * 2f64.ln();
        let a = power_law_alpha(&[4, 1, 1, 1, 1]).unwrap();
        assert!((a - (1.0 + 5.0 / sum)).abs() < 1e-14);
        assert!((a - 2.0305).abs() < 1e-3);
        let a2 = power_law_alpha(&[1, 1]).unwrap();
        assert!((a2 - (1.0 + 1.0 / 2f64.ln())).abs() < 1e-14);
        assert!((a2 - 2.4427).abs() < 1e-4);
        assert_eq!(power_law_alpha(&[1, 1, 1, 4, 1]).unwrap(), a);
        assert!(power_law_alpha(&[]).is_err());
    }

    /// Two hubs of degree `hub_deg` joined by an edge, each with leaves.
    fn double_star(hub_deg: usize) -> Tree {
        let leaves = hub_deg - 1;
        let k = 2 + 2 * leaves;
        let mut edges = vec![unit(0, 1)];
        for l in 0..leaves {
            edges.push(unit(0, 2 + l));
            edges.push(unit(1, 2 + leaves + l));
        }
        Tree::new(names(k), edges).unwrap()
    }

    #[test]
    fn rich_club_examples() {
        assert_eq!(rce(&double_star(5), 4), 1.0);
        assert_eq!(rce(&path(10), 4), 0.0);
        assert_eq!(rce(&star(10), 4), 0.0);
        // hubs not adjacent: two degree-5 hubs joined through a middle node
        let mut edges = vec![unit(0, 2), unit(2, 1)];
        for l in 0..4 {
            edges.push(unit(0, 3 + l));
            edges.push(unit(1, 7 + l));
        }
        let t = Tree::new(names(11), edges).unwrap();
        assert_eq!(rce(&t, 4), 0.0);
    }

    #[test]
    fn assortativity_examples() {
        assert!((assortativity(&star(6)).unwrap() + 1.0).abs() < 1e-12);
        // path(4) end-point degree pairs: (1,2),(2,1),(2,2),(2,2),(2,1),(1,2)
        let xs = [1.0, 2.0, 2.0, 2.0, 2.0, 1.0];
        let ys = [2.0, 1.0, 2.0, 2.0, 1.0, 2.0];
        let m = 5.0 / 3.0;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - m) * (y - m)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
        let expected = sxy / sxx;
        let got = assortativity(&path(4)).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got + 0.5).abs() < 1e-12);
        assert_eq!(assortativity(&path(2)), None);
    }

    #[test]
    fn frame_composition() {
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 3).unwrap();
        let series = TreeSeries {
            dates: vec![d0],
            trees: vec![star(5)],
        };
        let f = indicator_series(&series, 4).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.rows[0], tree_indicators(&star(5), 4));
        assert_eq!(f.rows[0].max_degree, 4);

        let many = TreeSeries {
            dates: (0..52).map(|i| d0 + chrono::Duration::weeks(i)).collect(),
            trees: vec![path(6); 52],
        };
        let f = indicator_series(&many, 4).unwrap();
        for col in SCALAR_COLUMNS {
            let c = f.scalar(col).unwrap();
            assert!(c.iter().all(|v| *v == c[0]), "{col}");
        }
        let means = f.node_means();
        assert_eq!(means[0].degree, 1.0);
        assert_eq!(means[2].betweenness, 6.0);
    }
}
