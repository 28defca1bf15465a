use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;

use super::distance::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// A spanning tree over labelled nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<String>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merge the sets of `a` and `b`; false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

impl Tree {
    /// Validates `k - 1` edges forming a connected acyclic graph with
    /// finite non-negative weights.
    pub fn new(nodes: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let k = nodes.len();
        if k < 2 {
            return Err(Error::InvalidData("a tree needs at least 2 nodes".into()));
        }
        if edges.len() != k - 1 {
            return Err(Error::InvalidData(format!(
                "{} edges for {k} nodes, expected {}",
                edges.len(),
                k - 1
            )));
        }
        let mut uf = UnionFind::new(k);
        let mut adjacency = vec![Vec::new(); k];
        for e in &edges {
            if e.i >= k || e.j >= k || e.i == e.j {
                return Err(Error::InvalidData(format!("bad edge ({}, {})", e.i, e.j)));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::InvalidData(format!("bad edge weight {}", e.weight)));
            }
            if !uf.union(e.i, e.j) {
                return Err(Error::InvalidData("edges contain a cycle".into()));
            }
            adjacency[e.i].push((e.j, e.weight));
            adjacency[e.j].push((e.i, e.weight));
        }
        Ok(Tree {
            nodes,
            edges,
            adjacency,
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn k(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Hop counts and weighted path lengths from `source` to every node.
    pub fn distances_from(&self, source: usize) -> (Vec<usize>, Vec<f64>) {
        let k = self.k();
        let mut hops = vec![usize::MAX; k];
        let mut length = vec![0.0; k];
        let mut queue = VecDeque::from([source]);
        hops[source] = 0;
        while let Some(v) = queue.pop_front() {
            for &(w, weight) in &self.adjacency[v] {
                if hops[w] == usize::MAX {
                    hops[w] = hops[v] + 1;
                    length[w] = length[v] + weight;
                    queue.push_back(w);
                }
            }
        }
        (hops, length)
    }

    /// Graphviz rendering with edge weights as labels.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph \"{}\" {{", name.replace('"', "'"));
        for n in &self.nodes {
            let _ = writeln!(out, "  \"{}\";", n.replace('"', "'"));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -- \"{}\" [label=\"{}\"];",
                self.nodes[e.i].replace('"', "'"),
                self.nodes[e.j].replace('"', "'"),
                crate::format::fmt_num(e.weight)
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Kruskal's algorithm. Edges are considered in ascending
/// `(weight, i, j)` order with `i < j`, so ties resolve lexicographically.
pub fn kruskal_mst(dist: &DistanceMatrix) -> Result<Tree> {
    let k = dist.k();
    if k < 2 {
        return Err(Error::InvalidData("need at least 2 nodes".into()));
    }
    let mut candidates = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let w = dist.get(i, j);
            if !w.is_finite() {
                return Err(Error::InvalidData(format!("non-finite distance at ({i}, {j})")));
            }
            candidates.push(Edge { i, j, weight: w });
        }
    }
    candidates.sort_by(|a, b| a.weight.total_cmp(&b.weight).then(a.i.cmp(&b.i)).then(a.j.cmp(&b.j)));
    let mut uf = UnionFind::new(k);
    let mut edges = Vec::with_capacity(k - 1);
    for e in candidates {
        if uf.union(e.i, e.j) {
            edges.push(e);
            if edges.len() == k - 1 {
                break;
            }
        }
    }
    Tree::new(dist.tickers().to_vec(), edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist3() -> DistanceMatrix {
        DistanceMatrix::new(
            vec!["1".into(), "2".into(), "3".into()],
            vec![vec![0.0, 0.3, 0.9], vec![0.3, 0.0, 0.5], vec![0.9, 0.5, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn three_node_example() {
        let t = kruskal_mst(&dist3()).unwrap();
        let pairs: Vec<(usize, usize)> = t.edges().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        assert!((t.total_weight() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn ties_resolve_to_star_on_first_node() {
        let k = 6;
        let m: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let names = (1..=k).map(|i| i.to_string()).collect();
        let t = kruskal_mst(&DistanceMatrix::new(names, m).unwrap()).unwrap();
        let pairs: Vec<(usize, usize)> = t.edges().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, (1..k).map(|j| (0, j)).collect::<Vec<_>>());
    }

    #[test]
    fn tree_validation() {
        let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let e = |i, j| Edge { i, j, weight: 1.0 };
        assert!(Tree::new(names.clone(), vec![e(0, 1)]).is_err());
        assert!(Tree::new(names.clone(), vec![e(0, 1), e(1, 0)]).is_err());
        assert!(Tree::new(names.clone(), vec![e(0, 1), e(1, 3)]).is_err());
        let bad = Edge {
            i: 1,
            j: 2,
            weight: -1.0,
        };
        assert!(Tree::new(names.clone(), vec![e(0, 1), bad]).is_err());
        assert!(Tree::new(names, vec![e(0, 1), e(1, 2)]).is_ok());
    }

    #[test]
    fn dot_export_lists_edges() {
        let t = kruskal_mst(&dist3()).unwrap();
        let dot = t.to_dot("2020-01-03");
        assert!(dot.starts_with("graph \"2020-01-03\" {"));
        assert!(dot.contains("\"1\" -- \"2\" [label=\"0.3\"];"));
        assert!(dot.contains("\"2\" -- \"3\" [label=\"0.5\"];"));
    }
}
