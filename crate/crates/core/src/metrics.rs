// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Weighted node and graph measures.
//!
//! Edge weights are similarities; path lengths use the reciprocal `1/w` as
//! the edge length. Only strictly positive weights count as edges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphbuild::TopicNetwork;
use crate::nulls::{derive_seed, lattice_reference, random_reference};

/// Sources per parallel work unit. Fixed so that floating-point reductions
/// do not depend on the worker count.
const SOURCE_CHUNK: usize = 16;

/// Relative tolerance under which two path lengths count as equal.
const TIE_TOLERANCE: f64 = 1e-12;

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub degree: Vec<usize>,
    pub strength: Vec<f64>,
    pub betweenness: Vec<f64>,
    pub clustering: Vec<f64>,
}

pub fn degree_strength(net: &TopicNetwork) -> (Vec<usize>, Vec<f64>) {
    let n = net.node_count();
    (0..n)
        .map(|i| {
            let row = net.row(i);
            let k = row.iter().filter(|&&w| w > 0.0).count();
            let s = row.iter().filter(|&&w| w > 0.0).sum::<f64>();
            (k, s)
        })
        .unzip()
}

/// All-pairs weighted shortest path lengths; `+inf` when unreachable.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    dist: Vec<f64>,
}

impl DistanceMatrix {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Mean inverse distance over ordered pairs, `1/inf = 0`.
    pub fn efficiency(&self) -> Result<f64> {
        let n = self.n;
        if n < 2 {
            return Err(Error::TooFewNodes { required: 2, actual: n });
        }
        let total: f64 = (0..n)
            .map(|i| {
                let row_sum: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let d = self.get(i, j);
                        if d.is_finite() {
                            1.0 / d
                        } else {
                            0.0
                        }
                    })
                    .sum();
                row_sum / (n - 1) as f64
            })
            .sum();
        Ok(total / n as f64)
    }

    /// Mean distance over ordered reachable pairs.
    pub fn path_length(&self) -> Result<PathLength> {
        let n = self.n;
        if n < 2 {
            return Err(Error::TooFewNodes { required: 2, actual: n });
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            for j in 0..n {
                let d = self.get(i, j);
                if i != j && d.is_finite() {
                    sum += d;
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(Error::NoReachablePairs);
        }
        Ok(PathLength {
            value: sum / count as f64,
            disconnected: count < n * (n - 1),
        })
    }
}

/// Characteristic path length; `disconnected` marks that some ordered pairs
/// were unreachable and left out of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLength {
    pub value: f64,
    pub disconnected: bool,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn lengths(adj: &[Vec<(usize, f64)>]) -> Vec<Vec<(usize, f64)>> {
    adj.iter()
        .map(|nb| nb.iter().map(|&(j, w)| (j, 1.0 / w)).collect())
        .collect()
}

fn dijkstra(len: &[Vec<(usize, f64)>], source: usize, dist: &mut [f64]) {
    dist.fill(f64::INFINITY);
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { dist: 0.0, node: source });
    while let Some(HeapEntry { dist: d, node: v }) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, l) in &len[v] {
            let nd = d + l;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(HeapEntry { dist: nd, node: w });
            }
        }
    }
}

pub fn shortest_path_lengths(net: &TopicNetwork) -> DistanceMatrix {
    let n = net.node_count();
    let len = lengths(&net.adjacency());
    let mut dist = vec![0.0; n * n];
    if n > 0 {
        dist.par_chunks_mut(n)
            .enumerate()
            .for_each(|(s, row)| dijkstra(&len, s, row));
    }
    DistanceMatrix { n, dist }
}

/// Single-source shortest-path DAG accumulation (Brandes) with exact
/// multiplicity of equal-length paths.
fn brandes_source(len: &[Vec<(usize, f64)>], s: usize, acc: &mut [f64]) {
    let n = len.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut sigma = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    sigma[s] = 1.0;
    heap.push(HeapEntry { dist: 0.0, node: s });
    while let Some(HeapEntry { node: v, .. }) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        order.push(v);
        let dv = dist[v];
        for &(w, l) in &len[v] {
            if done[w] {
                continue;
            }
            let nd = dv + l;
            if dist[w].is_finite() && same_length(nd, dist[w]) {
                sigma[w] += sigma[v];
                preds[w].push(v);
            } else if nd < dist[w] {
                dist[w] = nd;
                sigma[w] = sigma[v];
                preds[w].clear();
                preds[w].push(v);
                heap.push(HeapEntry { dist: nd, node: w });
            }
        }
    }
    let mut delta = vec![0.0f64; n];
    while let Some(w) = order.pop() {
        for &v in &preds[w] {
            delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
        }
        if w != s {
            acc[w] += delta[w];
        }
    }
}

/// Fraction of shortest paths between ordered pairs of other nodes passing
/// through each node, normalized by `(n−1)(n−2)`.
pub fn betweenness(net: &TopicNetwork) -> Result<Vec<f64>> {
    let n = net.node_count();
    if n < 3 {
        return Err(Error::TooFewNodes { required: 3, actual: n });
    }
    let len = lengths(&net.adjacency());
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            for &s in chunk {
                brandes_source(&len, s, &mut acc);
            }
            acc
        })
        .collect();
    let norm = ((n - 1) * (n - 2)) as f64;
    let mut b = vec![0.0; n];
    for p in partials {
        for (bi, pi) in b.iter_mut().zip(p) {
            *bi += pi;
        }
    }
    Ok(b.into_iter().map(|x| x / norm).collect())
}

/// Local weighted clustering coefficients and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub local: Vec<f64>,
    pub mean: f64,
}

/// Barrat clustering; nodes with fewer than two neighbors get 0.
pub fn clustering_barrat(net: &TopicNetwork) -> Clustering {
    let n = net.node_count();
    let adj = net.adjacency();
    let local: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nb = &adj[i];
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let s: f64 = nb.iter().map(|&(_, w)| w).sum();
            let mut sum = 0.0;
            for (a, &(j, wij)) in nb.iter().enumerate() {
                let row_j = net.row(j);
                for &(h, wih) in &nb[a + 1..] {
                    if row_j[h] > 0.0 {
                        sum += wij + wih;
                    }
                }
            }
            sum / (s * (k - 1) as f64)
        })
        .collect();
    let mean = if n == 0 {
        0.0
    } else {
        local.iter().sum::<f64>() / n as f64
    };
    Clustering { local, mean }
}

pub fn global_efficiency(net: &TopicNetwork) -> Result<f64> {
    if net.node_count() < 2 {
        return Err(Error::TooFewNodes {
            required: 2,
            actual: net.node_count(),
        });
    }
    shortest_path_lengths(net).efficiency()
}

pub fn path_length(net: &TopicNetwork) -> Result<PathLength> {
    if net.node_count() < 2 {
        return Err(Error::TooFewNodes {
            required: 2,
            actual: net.node_count(),
        });
    }
    shortest_path_lengths(net).path_length()
}

/// Small-world propensity with its two deviation terms and the reference
/// values behind them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallWorld {
    pub phi: f64,
    pub delta_c: f64,
    pub delta_l: f64,
    pub clustering_observed: f64,
    pub clustering_lattice: f64,
    pub clustering_random: f64,
    pub path_length_observed: f64,
    pub path_length_lattice: f64,
    pub path_length_random: f64,
}

fn clustering_and_path_length(net: &TopicNetwork) -> Result<(f64, f64)> {
    let c = clustering_barrat(net).mean;
    let l = path_length(net)?.value;
    Ok((c, l))
}

fn clamped_ratio(num: f64, den: f64, what: &str) -> f64 {
    if den == 0.0 || !den.is_finite() {
        log::warn!("degenerate {what} references (equal lattice and random values); deviation set to 0");
        return 0.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// `φ = 1 − sqrt((ΔC² + ΔL²)/2)` with `ΔC` measured against a lattice
/// reference and `ΔL` against a degree/strength-preserving random reference.
pub fn small_world_propensity(net: &TopicNetwork, seed: u64) -> Result<SmallWorld> {
    if net.node_count() < 4 {
        return Err(Error::TooFewNodes {
            required: 4,
            actual: net.node_count(),
        });
    }
    if net.edge_count() == 0 {
        return Err(Error::NoEdges);
    }
    let lattice = lattice_reference(net, derive_seed(seed, 0))?;
    let random = random_reference(net, derive_seed(seed, 1))?;
    let (c_obs, l_obs) = clustering_and_path_length(net)?;
    let (c_latt, l_latt) = clustering_and_path_length(&lattice)?;
    let (c_rand, l_rand) = clustering_and_path_length(&random)?;
    let delta_c = clamped_ratio(c_latt - c_obs, c_latt - c_rand, "clustering");
    let delta_l = clamped_ratio(l_obs - l_rand, l_latt - l_rand, "path length");
    let phi = 1.0 - ((delta_c * delta_c + delta_l * delta_l) / 2.0).sqrt();
    Ok(SmallWorld {
        phi,
        delta_c,
        delta_l,
        clustering_observed: c_obs,
        clustering_lattice: c_latt,
        clustering_random: c_rand,
        path_length_observed: l_obs,
        path_length_lattice: l_latt,
        path_length_random: l_rand,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub efficiency: f64,
    pub path_length: f64,
    pub mean_clustering: f64,
    pub swp: f64,
    pub delta_c: f64,
    pub delta_l: f64,
    pub disconnected_flag: bool,
}

/// Every node and graph measure of one network.
pub fn compute_metrics(net: &TopicNetwork, seed: u64) -> Result<(NodeMetrics, GraphMetrics, SmallWorld)> {
    let (degree, strength) = degree_strength(net);
    let betweenness = betweenness(net)?;
    let clustering = clustering_barrat(net);
    let dist = shortest_path_lengths(net);
    let pl = dist.path_length()?;
    let efficiency = dist.efficiency()?;
    let swp = small_world_propensity(net, seed)?;
    let nodes = NodeMetrics {
        degree,
        strength,
        betweenness,
        clustering: clustering.local,
    };
    let graph = GraphMetrics {
        efficiency,
        path_length: pl.value,
        mean_clustering: clustering.mean,
        swp: swp.phi,
        delta_c: swp.delta_c,
        delta_l: swp.delta_l,
        disconnected_flag: pl.disconnected,
    };
    Ok((nodes, graph, swp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetricsRow {
    pub phrase: String,
    pub degree: usize,
    pub strength: f64,
    pub betweenness: f64,
    pub clustering: f64,
}

/// Metrics export document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub manifest_hash: Option<String>,
    pub nodes: Vec<NodeMetricsRow>,
    pub graph: GraphMetrics,
}

impl MetricsReport {
    pub fn new(net: &TopicNetwork, nodes: &NodeMetrics, graph: &GraphMetrics) -> Self {
        MetricsReport {
            manifest_hash: None,
            nodes: net
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, t)| NodeMetricsRow {
                    phrase: t.phrase.clone(),
                    degree: nodes.degree[i],
                    strength: nodes.strength[i],
                    betweenness: nodes.betweenness[i],
                    clustering: nodes.clustering[i],
                })
                .collect(),
            graph: graph.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> TopicNetwork {
        TopicNetwork::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    fn complete(n: usize, w: f64) -> TopicNetwork {
        let mut e = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                e.push((i, j, w));
            }
        }
        TopicNetwork::from_edges(n, &e).unwrap()
    }

    #[test]
    fn degree_and_strength_basics() {
        let tri = complete(3, 0.5);
        let (k, s) = degree_strength(&tri);
        assert_eq!(k, vec![2, 2, 2]);
        assert_eq!(s, vec![1.0, 1.0, 1.0]);
        let iso = TopicNetwork::from_edges(3, &[(0, 1, 0.3)]).unwrap();
        let (k, s) = degree_strength(&iso);
        assert_eq!((k[2], s[2]), (0, 0.0));
    }

    #[test]
    fn distances_on_paths_and_components() {
        let d = shortest_path_lengths(&path3());
        assert_eq!(d.get(0, 2), 2.0);
        let two = TopicNetwork::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(shortest_path_lengths(&two).get(0, 3), f64::INFINITY);
        let weighted = TopicNetwork::from_edges(3, &[(0, 1, 0.5), (1, 2, 0.25), (0, 2, 0.1)]).unwrap();
        assert_eq!(shortest_path_lengths(&weighted).get(0, 2), 6.0);
    }

    #[test]
    fn betweenness_examples() {
        assert_eq!(betweenness(&path3()).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(betweenness(&complete(5, 1.0)).unwrap().iter().all(|&b| b == 0.0));
        assert!(matches!(
            betweenness(&complete(2, 1.0)),
            Err(Error::TooFewNodes { required: 3, .. })
        ));
        // Square: each pair of opposite corners has two shortest paths.
        let sq = TopicNetwork::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]).unwrap();
        let b = betweenness(&sq).unwrap();
        for v in b {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn clustering_examples() {
        let c = clustering_barrat(&complete(3, 1.0));
        assert_eq!(c.local, vec![1.0, 1.0, 1.0]);
        let star = TopicNetwork::from_edges(4, &[(0, 1, 1.0), (0, 2, 0.5), (0, 3, 0.2)]).unwrap();
        let c = clustering_barrat(&star);
        assert_eq!(c.local, vec![0.0; 4]);
        // Triangle 0-1-2 plus pendant 0-3; node 0 has k=3.
        let net = TopicNetwork::from_edges(4, &[(0, 1, 0.5), (0, 2, 1.0), (1, 2, 1.0), (0, 3, 0.5)]).unwrap();
        let c = clustering_barrat(&net);
        // (w01 + w02) / (s0 (k0 − 1)) = 1.5 / (2.0 · 2)
        assert!((c.local[0] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn efficiency_and_path_length_examples() {
        assert_eq!(global_efficiency(&complete(4, 1.0)).unwrap(), 1.0);
        let e = global_efficiency(&path3()).unwrap();
        assert!((e - 2.5 / 3.0).abs() < 1e-15);
        let empty = TopicNetwork::from_weights(3, vec![0.0; 9]).unwrap();
        assert_eq!(global_efficiency(&empty).unwrap(), 0.0);

        assert_eq!(path_length(&complete(4, 1.0)).unwrap().value, 1.0);
        let l = path_length(&path3()).unwrap();
        assert!((l.value - 8.0 / 6.0).abs() < 1e-15);
        assert!(!l.disconnected);
        let two = TopicNetwork::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let l = path_length(&two).unwrap();
        assert_eq!(l.value, 1.0);
        assert!(l.disconnected);
        assert!(matches!(path_length(&empty), Err(Error::NoReachablePairs)));
    }

    #[test]
    fn swp_bounds_and_preconditions() {
        let tiny = complete(3, 1.0);
        assert!(small_world_propensity(&tiny, 1).is_err());
        let empty = TopicNetwork::from_weights(5, vec![0.0; 25]).unwrap();
        assert!(matches!(small_world_propensity(&empty, 1), Err(Error::NoEdges)));
    }
}
