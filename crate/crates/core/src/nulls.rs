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

//! Reference and null networks.
//!
//! Random references keep the degree sequence exactly (double edge swaps)
//! and the strength sequence approximately (rank-matched weight placement
//! followed by greedy weight-swap repair). Lattice references place the
//! heaviest weights on the shortest ring distances. The temporal null
//! re-pairs document contents with publication dates.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Month};
use crate::error::{Error, Result};
use crate::graphbuild::TopicNetwork;
use crate::metrics::degree_strength;
use crate::scoring::MeasureTrajectory;

pub const DEFAULT_SWAPS_PER_EDGE: usize = 10;

/// Strength tolerance promised by the randomization (max relative error).
pub const STRENGTH_TOLERANCE: f64 = 0.05;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for member `index` of a run seeded with `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewireConfig {
    pub swaps_per_edge: usize,
    /// Weight repair stops once every node strength is within this relative
    /// error of the original.
    pub repair_target: f64,
}

impl Default for RewireConfig {
    fn default() -> Self {
        RewireConfig {
            swaps_per_edge: DEFAULT_SWAPS_PER_EDGE,
            repair_target: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewireReport {
    pub swaps_accepted: usize,
    pub max_strength_error: f64,
    pub degree_exact: bool,
}

fn max_relative_error(target: &[f64], got: &[f64]) -> f64 {
    target
        .iter()
        .zip(got)
        .filter(|(&s, _)| s > 0.0)
        .map(|(&s, &g)| ((g - s) / s).abs())
        .fold(0.0, f64::max)
}

fn has_independent_edges(edges: &[(usize, usize)]) -> bool {
    for (k, &(a, b)) in edges.iter().enumerate() {
        for &(c, d) in &edges[k + 1..] {
            if a != c && a != d && b != c && b != d {
                return true;
            }
        }
    }
    false
}

/// Degree-preserving double edge swaps followed by strength-matched weight
/// placement. Negative weights are ignored.
pub fn rewire_preserving(net: &TopicNetwork, seed: u64, swaps_per_edge: usize) -> Result<TopicNetwork> {
    let config = RewireConfig {
        swaps_per_edge,
        ..RewireConfig::default()
    };
    rewire_with_report(net, seed, &config).map(|(n, _)| n)
}

pub fn rewire_with_report(net: &TopicNetwork, seed: u64, config: &RewireConfig) -> Result<(TopicNetwork, RewireReport)> {
    let n = net.node_count();
    let original = net.edges();
    let e = original.len();
    let complete = e == n * n.saturating_sub(1) / 2;
    let mut edges: Vec<(usize, usize)> = original.iter().map(|&(i, j, _)| (i, j)).collect();
    let mut rng = rng_for(seed);
    let mut swaps_accepted = 0;

    if !complete {
        if !has_independent_edges(&edges) {
            return Err(Error::NullPrecondition(
                "rewiring needs two edges without a common endpoint".into(),
            ));
        }
        let mut adj = vec![false; n * n];
        for &(i, j) in &edges {
            adj[i * n + j] = true;
            adj[j * n + i] = true;
        }
        for _ in 0..config.swaps_per_edge * e {
            let x = rng.random_range(0..e);
            let y = rng.random_range(0..e);
            if x == y {
                continue;
            }
            let (a, b) = edges[x];
            let (mut c, mut d) = edges[y];
            if rng.random_bool(0.5) {
                std::mem::swap(&mut c, &mut d);
            }
            // (a,b),(c,d) -> (a,d),(c,b)
            if a == c || a == d || b == c || b == d || adj[a * n + d] || adj[c * n + b] {
                continue;
            }
            adj[a * n + b] = false;
            adj[b * n + a] = false;
            adj[c * n + d] = false;
            adj[d * n + c] = false;
            adj[a * n + d] = true;
            adj[d * n + a] = true;
            adj[c * n + b] = true;
            adj[b * n + c] = true;
            edges[x] = (a, d);
            edges[y] = (c, b);
            swaps_accepted += 1;
        }
    }

    let (_, target) = degree_strength(net);
    let mut sorted_w: Vec<f64> = original.iter().map(|&(_, _, w)| w).collect();
    sorted_w.sort_by(|a, b| a.total_cmp(b));

    // rank_of_edge[e] indexes sorted_w (ascending).
    let mut rank_of_edge = vec![0usize; e];
    if complete {
        let mut ranks: Vec<usize> = (0..e).collect();
        ranks.shuffle(&mut rng);
        rank_of_edge.copy_from_slice(&ranks);
    } else {
        let mut by_expectation: Vec<usize> = (0..e).collect();
        by_expectation.sort_by(|&p, &q| {
            let ep = target[edges[p].0] * target[edges[p].1];
            let eq = target[edges[q].0] * target[edges[q].1];
            ep.total_cmp(&eq).then(p.cmp(&q))
        });
        for (r, &edge) in by_expectation.iter().enumerate() {
            rank_of_edge[edge] = r;
        }
    }

    repair_strengths(n, &edges, &sorted_w, &target, &mut rank_of_edge, config.repair_target, &mut rng);

    let mut weights = vec![0.0; n * n];
    for (k, &(i, j)) in edges.iter().enumerate() {
        let w = sorted_w[rank_of_edge[k]];
        weights[i * n + j] = w;
        weights[j * n + i] = w;
    }
    let out = net.with_weights(weights)?;
    let (deg_in, _) = degree_strength(net);
    let (deg_out, got) = degree_strength(&out);
    let report = RewireReport {
        swaps_accepted,
        max_strength_error: max_relative_error(&target, &got),
        degree_exact: deg_in == deg_out,
    };
    if report.max_strength_error > STRENGTH_TOLERANCE {
        log::debug!(
            "rewired null exceeds strength tolerance: max relative error {:.4}",
            report.max_strength_error
        );
    }
    Ok((out, report))
}

/// Greedy weight exchange between edges: repeatedly take the node with the
/// largest relative strength error and swap one of its edge weights with
/// an edge whose weight closes the gap. The first phase accepts the swap
/// that most lowers the summed squared relative error. Once that stalls,
/// the second phase accepts any swap that leaves every touched node below
/// the current largest error, so the largest error never grows while the
/// worst nodes keep being revisited. Both phases share one swap budget.
fn repair_strengths(
    n: usize,
    edges: &[(usize, usize)],
    sorted_w: &[f64],
    target: &[f64],
    rank_of_edge: &mut [usize],
    repair_target: f64,
    rng: &mut ChaCha8Rng,
) {
    let e = edges.len();
    if e < 2 {
        return;
    }
    let mut edge_at_rank = vec![0usize; e];
    for (edge, &r) in rank_of_edge.iter().enumerate() {
        edge_at_rank[r] = edge;
    }
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &(i, j)) in edges.iter().enumerate() {
        incident[i].push(k);
        incident[j].push(k);
    }
    let mut current = vec![0.0; n];
    for (k, &(i, j)) in edges.iter().enumerate() {
        let w = sorted_w[rank_of_edge[k]];
        current[i] += w;
        current[j] += w;
    }
    let rel = |node: usize, value: f64| -> f64 {
        if target[node] > 0.0 {
            (value - target[node]) / target[node]
        } else {
            0.0
        }
    };

    const MAX_PROBES: usize = 24;
    const NEIGHBOR_RANKS: usize = 6;
    let budget = 50 * e + 10_000;
    let mut stuck = vec![false; n];
    let mut probes: Vec<usize> = Vec::new();
    let mut minimax = false;

    for _ in 0..budget {
        let mut worst = None;
        let mut worst_err = repair_target;
        for u in 0..n {
            let r = rel(u, current[u]).abs();
            if !stuck[u] && r > worst_err {
                worst_err = r;
                worst = Some(u);
            }
        }
        let Some(u) = worst else {
            if minimax || stuck.iter().all(|s| !s) {
                break;
            }
            minimax = true;
            stuck.fill(false);
            continue;
        };
        if minimax {
            worst_err = (0..n).map(|v| rel(v, current[v]).abs()).fold(0.0, f64::max);
        }
        let gap = target[u] - current[u];

        probes.clear();
        probes.extend_from_slice(&incident[u]);
        if probes.len() > MAX_PROBES {
            probes.partial_shuffle(rng, MAX_PROBES);
            probes.truncate(MAX_PROBES);
        }

        let mut best: Option<(usize, usize, f64)> = None;
        for &e1 in &probes {
            let w1 = sorted_w[rank_of_edge[e1]];
            let want = w1 + gap;
            let pos = sorted_w.partition_point(|&w| w < want);
            let lo = pos.saturating_sub(NEIGHBOR_RANKS);
            let hi = (pos + NEIGHBOR_RANKS).min(e);
            for r in lo..hi {
                let e2 = edge_at_rank[r];
                if e2 == e1 {
                    continue;
                }
                let w2 = sorted_w[r];
                let delta = w2 - w1;
                if delta == 0.0 {
                    continue;
                }
                let mut touched: [(usize, f64); 4] = [(usize::MAX, 0.0); 4];
                let mut len = 0;
                let mut bump = |node: usize, d: f64| {
                    for t in touched.iter_mut().take(len) {
                        if t.0 == node {
                            t.1 += d;
                            return;
                        }
                    }
                    touched[len] = (node, d);
                    len += 1;
                };
                bump(edges[e1].0, delta);
                bump(edges[e1].1, delta);
                bump(edges[e2].0, -delta);
                bump(edges[e2].1, -delta);
                let mut admissible = true;
                let mut change = 0.0;
                for &(node, d) in &touched[..len] {
                    let before = rel(node, current[node]);
                    let after = rel(node, current[node] + d);
                    admissible &= after.abs() < worst_err;
                    change += after * after - before * before;
                }
                let accept = if minimax { admissible } else { change < 0.0 };
                if accept && best.is_none_or(|b| change < b.2) {
                    best = Some((e1, e2, change));
                }
            }
        }

        match best {
            Some((e1, e2, _)) => {
                let (r1, r2) = (rank_of_edge[e1], rank_of_edge[e2]);
                let delta = sorted_w[r2] - sorted_w[r1];
                current[edges[e1].0] += delta;
                current[edges[e1].1] += delta;
                current[edges[e2].0] -= delta;
                current[edges[e2].1] -= delta;
                rank_of_edge[e1] = r2;
                rank_of_edge[e2] = r1;
                edge_at_rank[r1] = e2;
                edge_at_rank[r2] = e1;
                stuck.fill(false);
            }
            None => stuck[u] = true,
        }
    }
}

/// Ring lattice with the observed edge count. Edges fill the smallest
/// circular distances first; observed weights, sorted descending, go to
/// lattice edges in ascending distance order; node positions are shuffled.
pub fn lattice_reference(net: &TopicNetwork, seed: u64) -> Result<TopicNetwork> {
    let n = net.node_count();
    if n < 4 {
        return Err(Error::TooFewNodes { required: 4, actual: n });
    }
    let mut weights_desc: Vec<f64> = net.edges().iter().map(|&(_, _, w)| w).collect();
    let e = weights_desc.len();
    if e > n * (n - 1) / 2 {
        return Err(Error::NullPrecondition("edge count exceeds complete graph".into()));
    }
    weights_desc.sort_by(|a, b| b.total_cmp(a));
    let mut pairs = Vec::with_capacity(e);
    'fill: for d in 1..=n / 2 {
        let per_distance = if 2 * d == n { n / 2 } else { n };
        for i in 0..per_distance {
            if pairs.len() == e {
                break 'fill;
            }
            pairs.push((i, (i + d) % n));
        }
    }
    let mut position: Vec<usize> = (0..n).collect();
    position.shuffle(&mut rng_for(seed));
    let mut weights = vec![0.0; n * n];
    for (&(i, j), &w) in pairs.iter().zip(&weights_desc) {
        let (a, b) = (position[i], position[j]);
        weights[a * n + b] = w;
        weights[b * n + a] = w;
    }
    net.with_weights(weights)
}

/// Random reference for small-world propensity.
pub fn random_reference(net: &TopicNetwork, seed: u64) -> Result<TopicNetwork> {
    rewire_preserving(net, seed, DEFAULT_SWAPS_PER_EDGE)
}

/// The corpus's dates in a uniformly shuffled order, one per document.
pub fn permuted_dates(corpus: &Corpus, seed: u64) -> Vec<Month> {
    let mut dates = corpus.dates();
    dates.shuffle(&mut rng_for(seed));
    dates
}

/// Uniformly re-pair document contents with the corpus's dates.
pub fn permute_corpus_temporal(corpus: &Corpus, seed: u64) -> Result<Corpus> {
    corpus.with_dates(&permuted_dates(corpus, seed))
}

/// Per-window z-scores of `observed` against the null trajectories.
pub fn standardize_trajectory(observed: &MeasureTrajectory, nulls: &[MeasureTrajectory]) -> Result<MeasureTrajectory> {
    if nulls.len() < 2 {
        return Err(Error::TooFewObservations {
            required: 2,
            actual: nulls.len(),
        });
    }
    for null in nulls {
        if null.centers != observed.centers {
            return Err(Error::InvalidParameter(format!(
                "null trajectory `{}` is not aligned with the observed windows",
                null.label
            )));
        }
    }
    let m = nulls.len() as f64;
    let mut z = Vec::with_capacity(observed.values.len());
    for (t, &x) in observed.values.iter().enumerate() {
        let mean = nulls.iter().map(|nt| nt.values[t]).sum::<f64>() / m;
        let var = nulls.iter().map(|nt| (nt.values[t] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let sd = var.sqrt();
        if sd == 0.0 || !sd.is_finite() {
            return Err(Error::ZeroNullSd(observed.centers[t].to_string()));
        }
        z.push((x - mean) / sd);
    }
    Ok(MeasureTrajectory {
        label: observed.label.clone(),
        centers: observed.centers.clone(),
        values: z,
        standardized: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullGenerator {
    Rewire,
    Lattice,
    TemporalPermutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub max_strength_error: f64,
    pub degree_exact: bool,
    pub members_distinct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub manifest_hash: Option<String>,
    pub generator: NullGenerator,
    pub base_seed: u64,
    pub count: usize,
    pub preservation_report: PreservationReport,
}

/// Null networks generated from distinct derived seeds.
#[derive(Debug, Clone)]
pub struct NullEnsemble {
    pub generator: NullGenerator,
    pub base_seed: u64,
    pub members: Vec<TopicNetwork>,
    pub reports: Vec<RewireReport>,
}

impl NullEnsemble {
    /// `count` degree/strength-preserving nulls; member `k` uses
    /// `derive_seed(base_seed, k)`.
    pub fn rewired(net: &TopicNetwork, base_seed: u64, count: usize, config: &RewireConfig) -> Result<Self> {
        let results: Vec<(TopicNetwork, RewireReport)> = (0..count)
            .into_par_iter()
            .map(|k| rewire_with_report(net, derive_seed(base_seed, k as u64), config))
            .collect::<Result<_>>()?;
        let (members, reports): (Vec<_>, Vec<RewireReport>) = results.into_iter().unzip();
        let over = reports.iter().filter(|r| r.max_strength_error > STRENGTH_TOLERANCE).count();
        if over > 0 {
            log::warn!(
                "{over} of {count} rewired nulls exceed the {:.0}% strength tolerance (worst {:.4})",
                STRENGTH_TOLERANCE * 100.0,
                reports.iter().map(|r| r.max_strength_error).fold(0.0, f64::max)
            );
        }
        Ok(NullEnsemble {
            generator: NullGenerator::Rewire,
            base_seed,
            members,
            reports,
        })
    }

    /// Whether all members differ pairwise.
    pub fn members_distinct(&self) -> bool {
        for (a, x) in self.members.iter().enumerate() {
            for y in &self.members[a + 1..] {
                if x.weights() == y.weights() {
                    return false;
                }
            }
        }
        true
    }

    pub fn manifest(&self) -> EnsembleManifest {
        let distinct = self.members_distinct();
        if !distinct {
            log::warn!("null ensemble contains identical members");
        }
        EnsembleManifest {
            manifest_hash: None,
            generator: self.generator,
            base_seed: self.base_seed,
            count: self.members.len(),
            preservation_report: PreservationReport {
                max_strength_error: self.reports.iter().map(|r| r.max_strength_error).fold(0.0, f64::max),
                degree_exact: self.reports.iter().all(|r| r.degree_exact),
                members_distinct: distinct,
            },
        }
    }
}
