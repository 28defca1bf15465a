//! Brute-force oracles shared by the integration tests.

#![allow(dead_code)]

use rand::Rng;
use tailnet::graph::{DistanceMatrix, Edge, Tree};

pub fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("n{i}")).collect()
}

/// Edge list of the labelled tree encoded by a Prüfer sequence.
pub fn prufer_decode(seq: &[usize], k: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; k];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(k - 1);
    for &s in seq {
        let leaf = (0..k).find(|&v| degree[v] == 1).expect("a leaf exists");
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..k).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Minimum total weight over all `k^(k-2)` labelled spanning trees.
pub fn exhaustive_min_weight(dist: &DistanceMatrix) -> f64 {
    let k = dist.k();
    if k == 2 {
        return dist.get(0, 1);
    }
    let mut seq = vec![0usize; k - 2];
    let mut best = f64::INFINITY;
    loop {
        let w: f64 = prufer_decode(&seq, k).iter().map(|&(i, j)| dist.get(i, j)).sum();
        best = best.min(w);
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == seq.len() {
                return best;
            }
            seq[pos] += 1;
            if seq[pos] < k {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
    }
}

pub fn random_distances<R: Rng>(k: usize, rng: &mut R) -> DistanceMatrix {
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let d = rng.random_range(0.0..std::f64::consts::SQRT_2);
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    DistanceMatrix::new(names(k), m).unwrap()
}

/// Uniform random labelled tree with random positive weights.
pub fn random_tree<R: Rng>(k: usize, rng: &mut R) -> Tree {
    let seq: Vec<usize> = (0..k.saturating_sub(2)).map(|_| rng.random_range(0..k)).collect();
    let edges = prufer_decode(&seq, k)
        .into_iter()
        .map(|(i, j)| Edge {
            i,
            j,
            weight: rng.random_range(0.05..1.4),
        })
        .collect();
    Tree::new(names(k), edges).unwrap()
}

/// Node sequence of the unique path from `s` to `t`, by depth-first search
/// over the raw edge list.
pub fn path_nodes(tree: &Tree, s: usize, t: usize) -> Vec<usize> {
    fn dfs(tree: &Tree, v: usize, t: usize, seen: &mut Vec<bool>, path: &mut Vec<usize>) -> bool {
        path.push(v);
        if v == t {
            return true;
        }
        seen[v] = true;
        for e in tree.edges() {
            let w = if e.i == v {
                e.j
            } else if e.j == v {
                e.i
            } else {
                continue;
            };
            if !seen[w] && dfs(tree, w, t, seen, path) {
                return true;
            }
        }
        path.pop();
        false
    }
    let mut path = Vec::new();
    dfs(tree, s, t, &mut vec![false; tree.k()], &mut path);
    path
}

pub fn edge_weight(tree: &Tree, a: usize, b: usize) -> f64 {
    tree.edges()
        .iter()
        .find(|e| (e.i == a && e.j == b) || (e.i == b && e.j == a))
        .map(|e| e.weight)
        .expect("adjacent nodes")
}

pub fn path_length(tree: &Tree, s: usize, t: usize) -> f64 {
    path_nodes(tree, s, t)
        .windows(2)
        .map(|w| edge_weight(tree, w[0], w[1]))
        .sum()
}

pub fn hops(tree: &Tree, s: usize, t: usize) -> usize {
    path_nodes(tree, s, t).len() - 1
}

pub fn star(k: usize) -> Tree {
    let edges = (1..k).map(|j| Edge { i: 0, j, weight: 1.0 }).collect();
    Tree::new(names(k), edges).unwrap()
}

pub fn path(k: usize) -> Tree {
    let edges = (1..k)
        .map(|j| Edge {
            i: j - 1,
            j,
            weight: 1.0,
        })
        .collect();
    Tree::new(names(k), edges).unwrap()
}

pub fn mean_where(values: &[Option<f64>], keep: impl Fn(usize) -> bool) -> f64 {
    let v: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|(t, _)| keep(*t))
        .filter_map(|(_, x)| *x)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Small simulated price panel with an index column, written as CSV.
pub fn write_panel(dir: &std::path::Path, spec: &tailnet::simulate::ScenarioSpec, seed: u64) -> std::path::PathBuf {
    let prices = tailnet::simulate::simulate_panel(spec, seed).unwrap();
    let path = dir.join("prices.csv");
    tailnet::ingest::write_panel_csv(&path, &prices.dates, &prices.tickers, &prices.values).unwrap();
    path
}

pub fn small_scenario(assets: usize, periods: usize) -> tailnet::simulate::ScenarioSpec {
    let mut spec = tailnet::simulate::ScenarioSpec {
        assets,
        periods,
        ..Default::default()
    };
    for b in &mut spec.blocks {
        b.start = periods / 3;
        b.end = 2 * periods / 3;
    }
    spec
}

/// Every output file except the timing-bearing run report, by name.
pub fn output_bytes(dir: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut files = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "run_report.json" {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}
