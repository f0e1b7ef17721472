use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    /// Minutes, strictly positive.
    pub travel_time: f64,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>, travel_time: f64) -> Self {
        Self { from: from.into(), to: to.into(), travel_time }
    }
}

/// Undirected street network in compressed adjacency form.
///
/// Laplacian weights are conductances `1 / travel_time`; parallel edges add.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetNetwork {
    labels: Vec<String>,
    index: BTreeMap<String, usize>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    times: Vec<f64>,
    degree: Vec<f64>,
}

impl StreetNetwork {
    /// Nodes are the listed labels followed by any new labels met in `edges`.
    pub fn new(nodes: &[String], edges: &[Edge]) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        let mut index = BTreeMap::new();
        let mut intern = |s: &String, labels: &mut Vec<String>| -> usize {
            *index.entry(s.clone()).or_insert_with(|| {
                labels.push(s.clone());
                labels.len() - 1
            })
        };
        for n in nodes {
            intern(n, &mut labels);
        }
        let mut pairs = Vec::with_capacity(edges.len());
        for e in edges {
            if !(e.travel_time > 0.0) || !e.travel_time.is_finite() {
                return Err(Error::invalid("travel_time", format!("edge {}-{} has travel time {}", e.from, e.to, e.travel_time)));
            }
            if e.from == e.to {
                return Err(Error::invalid("edges", format!("self-loop at `{}`", e.from)));
            }
            let a = intern(&e.from, &mut labels);
            let b = intern(&e.to, &mut labels);
            pairs.push((a, b, e.travel_time));
        }
        let n = labels.len();
        let mut counts = vec![0usize; n + 1];
        for &(a, b, _) in &pairs {
            counts[a + 1] += 1;
            counts[b + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut targets = vec![0; 2 * pairs.len()];
        let mut times = vec![0.0; 2 * pairs.len()];
        let mut degree = vec![0.0; n];
        for &(a, b, t) in &pairs {
            for (u, v) in [(a, b), (b, a)] {
                targets[fill[u]] = v;
                times[fill[u]] = t;
                fill[u] += 1;
                degree[u] += 1.0 / t;
            }
        }
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Ok(Self { labels, index, offsets, targets, times, degree })
    }

    /// Path `0 – 1 – … – (n−1)` with equal edge travel times.
    pub fn line(n: usize, travel_time: f64) -> Result<Self> {
        let nodes: Vec<String> = (0..n).map(|i| format!("{i}")).collect();
        let edges: Vec<Edge> = (1..n).map(|i| Edge::new(nodes[i - 1].clone(), nodes[i].clone(), travel_time)).collect();
        Self::new(&nodes, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node_index(&self, label: &str) -> Result<usize> {
        self.index.get(label).copied().ok_or_else(|| Error::UnknownNode(label.into()))
    }

    /// `(neighbour, travel_time)` pairs of node `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()].iter().copied().zip(self.times[r].iter().copied())
    }

    /// Sum of conductances at node `i`.
    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.degree[i]
    }

    pub fn max_weighted_degree(&self) -> f64 {
        self.degree.iter().copied().fold(0.0, f64::max)
    }

    /// `out = L u` with `L = diag(degree) − W`.
    pub fn laplacian_apply(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.node_count() {
            let mut acc = self.degree[i] * u[i];
            for (j, t) in self.neighbors(i) {
                acc -= u[j] / t;
            }
            out[i] = acc;
        }
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() == 0 || network_distances_from(self, 0).iter().all(Option::is_some)
    }
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn network_distances_from(net: &StreetNetwork, source: usize) -> Vec<Option<f64>> {
    let mut dist: Vec<Option<f64>> = vec![None; net.node_count()];
    let mut heap = BinaryHeap::new();
    dist[source] = Some(0.0);
    heap.push(Frontier(0.0, source));
    while let Some(Frontier(d, u)) = heap.pop() {
        if dist[u].is_some_and(|best| d > best) {
            continue;
        }
        for (v, t) in net.neighbors(u) {
            let nd = d + t;
            if dist[v].is_none_or(|cur| nd < cur) {
                dist[v] = Some(nd);
                heap.push(Frontier(nd, v));
            }
        }
    }
    dist
}

/// Shortest-path travel times from `source`; `None` marks unreachable nodes.
pub fn network_distances(net: &StreetNetwork, source: &str) -> Result<Vec<Option<f64>>> {
    Ok(network_distances_from(net, net.node_index(source)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    #[test]
    fn path_distances() {
        let net = StreetNetwork::new(&[], &[Edge::new("A", "B", 2.0), Edge::new("B", "C", 3.0)]).unwrap();
        assert_eq!(network_distances(&net, "A").unwrap(), vec![Some(0.0), Some(2.0), Some(5.0)]);
        let single = StreetNetwork::new(&["x".to_string()], &[]).unwrap();
        assert_eq!(network_distances(&single, "x").unwrap(), vec![Some(0.0)]);
        assert_eq!(network_distances(&net, "Z").unwrap_err(), Error::UnknownNode("Z".into()));
    }

    #[test]
    fn disconnected_nodes_flagged() {
        let net = StreetNetwork::new(&[], &[Edge::new("A", "B", 1.0), Edge::new("C", "D", 1.0)]).unwrap();
        assert_eq!(network_distances(&net, "A").unwrap(), vec![Some(0.0), Some(1.0), None, None]);
        assert!(!net.is_connected());
    }

    #[test]
    fn invalid_edges() {
        assert!(StreetNetwork::new(&[], &[Edge::new("A", "B", 0.0)]).is_err());
        assert!(StreetNetwork::new(&[], &[Edge::new("A", "A", 1.0)]).is_err());
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let net = StreetNetwork::new(&[], &[Edge::new("A", "B", 2.0), Edge::new("B", "C", 4.0), Edge::new("A", "C", 1.0)]).unwrap();
        let mut out = vec![0.0; 3];
        net.laplacian_apply(&[1.0, 1.0, 1.0], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(net.weighted_degree(0), 0.5 + 1.0);
    }

    fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(a, b, t) in edges {
            d[a][b] = d[a][b].min(t);
            d[b][a] = d[b][a].min(t);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn dijkstra_matches_all_pairs(edges in prop::collection::vec((0usize..50, 0usize..50, 1u32..100), 0..150)) {
            let edges: Vec<(usize, usize, f64)> = edges.into_iter().filter(|(a, b, _)| a != b).map(|(a, b, t)| (a, b, f64::from(t) / 4.0)).collect();
            let nodes: Vec<String> = (0..50).map(|i| i.to_string()).collect();
            let list: Vec<Edge> = edges.iter().map(|&(a, b, t)| Edge::new(nodes[a].clone(), nodes[b].clone(), t)).collect();
            let net = StreetNetwork::new(&nodes, &list).unwrap();
            let oracle = floyd_warshall(50, &edges);
            for s in [0usize, 17, 49] {
                let d = network_distances(&net, &nodes[s]).unwrap();
                for (j, v) in d.iter().enumerate() {
                    match v {
                        Some(x) => prop_assert_eq!(*x, oracle[s][j]),
                        None => prop_assert!(oracle[s][j].is_infinite()),
                    }
                }
            }
        }
    }
}
