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

//! Modularity, Louvain maximization, consensus clustering and resolution
//! selection.
//!
//! Modularity sums over ordered node pairs:
//! `Q = (1/l) Σ_ij [w_ij − γ s_i s_j / l] δ(m_i, m_j)`.
//! The signed variant keeps separate null terms for the positive and
//! negative parts and normalizes by `l⁺ + l⁻`; a part with zero total
//! weight contributes no null term.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphbuild::TopicNetwork;
use crate::nulls::{derive_seed, rng_for};

/// Upper bound on consensus reclustering rounds.
pub const MAX_META_ITERATIONS: usize = 10;

/// Upper bound on restarts of the iterated Louvain loop.
const MAX_LOUVAIN_RESTARTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionOrigin {
    Classification,
    DataDriven,
    Planted,
}

impl PartitionOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            PartitionOrigin::Classification => "classification",
            PartitionOrigin::DataDriven => "data-driven",
            PartitionOrigin::Planted => "planted",
        }
    }
}

/// Community assignment of every node. Labels are contiguous from 1 and
/// numbered in order of first appearance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    gamma: Option<f64>,
    origin: PartitionOrigin,
}

impl Partition {
    /// Any integer labels; they are renumbered canonically.
    pub fn new(labels: &[usize], gamma: Option<f64>, origin: PartitionOrigin) -> Self {
        Partition {
            labels: canonical(labels),
            gamma,
            origin,
        }
    }

    /// Group nodes sharing a classification label.
    pub fn from_classifications<S: AsRef<str>>(classes: &[S]) -> Self {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let raw: Vec<usize> = classes
            .iter()
            .map(|c| {
                let next = ids.len();
                *ids.entry(c.as_ref()).or_insert(next)
            })
            .collect();
        Partition::new(&raw, None, PartitionOrigin::Classification)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn origin(&self) -> PartitionOrigin {
        self.origin
    }

    pub fn community_count(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Members of each community, indexed by `label - 1`.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.community_count()];
        for (node, &c) in self.labels.iter().enumerate() {
            out[c - 1].push(node);
        }
        out
    }

    /// Same grouping, ignoring label names, gamma and origin.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        self.labels == other.labels
    }

    fn zero_based(&self) -> Vec<usize> {
        self.labels.iter().map(|&c| c - 1).collect()
    }
}

fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map: HashMap<usize, usize> = HashMap::new();
    labels
        .iter()
        .map(|&c| {
            let next = map.len() + 1;
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Louvain working graph: symmetric adjacency without self entries plus
/// positive and negative strengths carried over from the original nodes.
#[derive(Debug, Clone)]
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    sp: Vec<f64>,
    sn: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Quality {
    gamma: f64,
    lp: f64,
    ln: f64,
}

impl Quality {
    fn null(&self, sp: f64, sn: f64, totp: f64, totn: f64) -> f64 {
        let mut t = 0.0;
        if self.lp > 0.0 {
            t += sp * totp / self.lp;
        }
        if self.ln > 0.0 {
            t -= sn * totn / self.ln;
        }
        self.gamma * t
    }
}

fn base_level(net: &TopicNetwork, signed: bool) -> (Level, Quality) {
    let n = net.node_count();
    let mut adj = vec![Vec::new(); n];
    let mut sp = vec![0.0; n];
    let mut sn = vec![0.0; n];
    for i in 0..n {
        for (j, &w) in net.row(i).iter().enumerate() {
            if w > 0.0 {
                adj[i].push((j, w));
                sp[i] += w;
            } else if w < 0.0 && signed {
                adj[i].push((j, w));
                sn[i] -= w;
            }
        }
    }
    let q = Quality {
        gamma: 1.0,
        lp: sp.iter().sum(),
        ln: sn.iter().sum(),
    };
    (Level { adj, sp, sn }, q)
}

fn quality_of(level: &Level, q: &Quality, labels: &[usize]) -> f64 {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut totp = vec![0.0; k];
    let mut totn = vec![0.0; k];
    let mut internal = 0.0;
    for (i, nbrs) in level.adj.iter().enumerate() {
        totp[labels[i]] += level.sp[i];
        totn[labels[i]] += level.sn[i];
        for &(j, w) in nbrs {
            if labels[j] == labels[i] {
                internal += w;
            }
        }
    }
    let mut null = 0.0;
    for c in 0..k {
        null += q.null(totp[c], totn[c], totp[c], totn[c]);
    }
    (internal - null) / (q.lp + q.ln)
}

/// Generalized modularity of `part` on `net`. With `signed = false` only
/// positive weights are used.
pub fn modularity(net: &TopicNetwork, part: &Partition, gamma: f64, signed: bool) -> Result<f64> {
    if part.len() != net.node_count() {
        return Err(Error::NodeSetMismatch {
            partition: part.len(),
            network: net.node_count(),
        });
    }
    check_gamma(gamma)?;
    let (level, mut q) = base_level(net, signed);
    if q.lp + q.ln == 0.0 {
        return Err(Error::NoEdges);
    }
    q.gamma = gamma;
    Ok(quality_of(&level, &q, &part.zero_based()))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("resolution {gamma} must be positive")));
    }
    Ok(())
}

/// One sweep-until-stable pass of single-node moves. `comm` holds
/// community ids in `0..n`. Returns whether any node moved.
fn local_moving(level: &Level, q: &Quality, comm: &mut [usize], rng: &mut rand_chacha::ChaCha8Rng) -> bool {
    let n = level.adj.len();
    let mut totp = vec![0.0; n];
    let mut totn = vec![0.0; n];
    let mut size = vec![0usize; n];
    for i in 0..n {
        totp[comm[i]] += level.sp[i];
        totn[comm[i]] += level.sn[i];
        size[comm[i]] += 1;
    }
    let mut empty: Vec<usize> = (0..n).rev().filter(|&c| size[c] == 0).collect();
    let eps = 1e-12 * (q.lp + q.ln) / n as f64;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut link = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved = false;
    loop {
        let mut improved = false;
        for &i in &order {
            let own = comm[i];
            for &(j, w) in &level.adj[i] {
                let c = comm[j];
                if !seen[c] {
                    seen[c] = true;
                    touched.push(c);
                }
                link[c] += w;
            }
            totp[own] -= level.sp[i];
            totn[own] -= level.sn[i];
            size[own] -= 1;

            let (sp, sn) = (level.sp[i], level.sn[i]);
            let mut best = own;
            let mut best_gain = link[own] - q.null(sp, sn, totp[own], totn[own]);
            for &c in &touched {
                if c == own {
                    continue;
                }
                let gain = link[c] - q.null(sp, sn, totp[c], totn[c]);
                if gain > best_gain + eps {
                    best = c;
                    best_gain = gain;
                }
            }
            if size[own] > 0 && 0.0 > best_gain + eps {
                best = *empty.last().expect("a community is empty while a node is detached");
            }

            if best != own {
                if size[own] == 0 {
                    empty.push(own);
                }
                if size[best] == 0 {
                    let pos = empty.iter().rposition(|&c| c == best).expect("empty community tracked");
                    empty.remove(pos);
                }
                improved = true;
                moved = true;
            }
            comm[i] = best;
            totp[best] += sp;
            totn[best] += sn;
            size[best] += 1;
            for &c in &touched {
                link[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
        }
        if !improved {
            return moved;
        }
    }
}

/// Renumber to `0..k` in order of first appearance; returns `k`.
fn compact(comm: &mut [usize]) -> usize {
    let mut map: HashMap<usize, usize> = HashMap::new();
    for c in comm.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

fn aggregate(level: &Level, comm: &[usize], k: usize) -> Level {
    let mut members = vec![Vec::new(); k];
    for (i, &c) in comm.iter().enumerate() {
        members[c].push(i);
    }
    let mut adj = vec![Vec::new(); k];
    let mut sp = vec![0.0; k];
    let mut sn = vec![0.0; k];
    let mut acc = vec![0.0; k];
    let mut seen = vec![false; k];
    let mut touched = Vec::new();
    for c in 0..k {
        for &i in &members[c] {
            sp[c] += level.sp[i];
            sn[c] += level.sn[i];
            for &(j, w) in &level.adj[i] {
                let d = comm[j];
                if d == c {
                    continue;
                }
                if !seen[d] {
                    seen[d] = true;
                    touched.push(d);
                }
                acc[d] += w;
            }
        }
        touched.sort_unstable();
        for &d in &touched {
            if acc[d] != 0.0 {
                adj[c].push((d, acc[d]));
            }
            acc[d] = 0.0;
            seen[d] = false;
        }
        touched.clear();
    }
    Level { adj, sp, sn }
}

/// Multi-level Louvain from an initial assignment of the base nodes.
fn louvain_pass(base: &Level, q: &Quality, init: &[usize], rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    let mut membership: Vec<usize> = init.to_vec();
    let mut level = base.clone();
    let mut comm: Vec<usize> = init.to_vec();
    let mut to_level: Vec<usize> = (0..base.adj.len()).collect();
    loop {
        local_moving(&level, q, &mut comm, rng);
        let k = compact(&mut comm);
        for (v, lv) in to_level.iter_mut().enumerate() {
            *lv = comm[*lv];
            membership[v] = *lv;
        }
        if k == level.adj.len() {
            return membership;
        }
        level = aggregate(&level, &comm, k);
        comm = (0..k).collect();
    }
}

fn louvain_labels(base: &Level, q: &Quality, seed: u64) -> Vec<usize> {
    let n = base.adj.len();
    let mut rng = rng_for(seed);
    let mut labels: Vec<usize> = (0..n).collect();
    let mut best_q = quality_of(base, q, &labels);
    let eps = 1e-12 * best_q.abs().max(1.0);
    for _ in 0..MAX_LOUVAIN_RESTARTS {
        let next = louvain_pass(base, q, &labels, &mut rng);
        let next_q = quality_of(base, q, &next);
        if next_q <= best_q + eps {
            break;
        }
        labels = next;
        best_q = next_q;
    }
    labels
}

/// Iterated Louvain: multi-level passes restarted from the previous
/// result until modularity stops improving. Negative weights switch to the
/// signed quality function.
pub fn louvain_partition(net: &TopicNetwork, gamma: f64, seed: u64) -> Result<Partition> {
    check_gamma(gamma)?;
    let signed = net.has_negative();
    let (base, mut q) = base_level(net, signed);
    if q.lp + q.ln == 0.0 {
        return Err(Error::NoEdges);
    }
    q.gamma = gamma;
    let labels = louvain_labels(&base, &q, seed);
    Ok(Partition::new(&labels, Some(gamma), PartitionOrigin::DataDriven))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub partition: Partition,
    /// Row-major `N×N` co-membership fractions over the first round of runs.
    pub coassignment: Vec<f64>,
    pub runs: usize,
    pub converged: bool,
    pub meta_iterations: usize,
}

/// Fraction of partitions placing each node pair together.
pub fn coassignment_matrix(parts: &[Vec<usize>]) -> Vec<f64> {
    let n = parts.first().map_or(0, Vec::len);
    let mut m = vec![0.0; n * n];
    for p in parts {
        for i in 0..n {
            for j in (i + 1)..n {
                if p[i] == p[j] {
                    m[i * n + j] += 1.0;
                }
            }
        }
    }
    let r = parts.len() as f64;
    for i in 0..n {
        m[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let f = m[i * n + j] / r;
            m[i * n + j] = f;
            m[j * n + i] = f;
        }
    }
    m
}

fn all_agree(parts: &[Vec<usize>]) -> bool {
    parts.windows(2).all(|w| w[0] == w[1])
}

/// Consensus over `runs` Louvain runs. The co-assignment matrix is
/// thresholded at its mean off-diagonal value and reclustered at `γ = 1`
/// until every run agrees or [`MAX_META_ITERATIONS`] rounds have passed; in
/// the latter case the final round's best-modularity partition is kept.
pub fn consensus_partition(net: &TopicNetwork, gamma: f64, runs: usize, seed: u64) -> Result<ConsensusResult> {
    if runs < 2 {
        return Err(Error::InvalidParameter(format!("consensus needs at least 2 runs, got {runs}")));
    }
    check_gamma(gamma)?;
    let signed = net.has_negative();
    let (base, mut q) = base_level(net, signed);
    if q.lp + q.ln == 0.0 {
        return Err(Error::NoEdges);
    }
    q.gamma = gamma;
    let n = net.node_count();

    let mut parts: Vec<Vec<usize>> = (0..runs)
        .into_par_iter()
        .map(|k| canonical(&louvain_labels(&base, &q, derive_seed(seed, k as u64))))
        .collect();
    let first = coassignment_matrix(&parts);
    let mut meta = 1;
    let mut converged = all_agree(&parts);
    let mut current = first.clone();
    while !converged && meta < MAX_META_ITERATIONS {
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += current[i * n + j];
                }
            }
        }
        let tau = sum / (n * (n - 1)) as f64;
        let mut thresholded = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = current[i * n + j];
                if i != j && v >= tau {
                    thresholded[i * n + j] = v;
                }
            }
        }
        let (cbase, mut cq) = base_level(&TopicNetwork::from_weights(n, thresholded)?, false);
        cq.gamma = 1.0;
        let round = meta as u64;
        parts = (0..runs)
            .into_par_iter()
            .map(|k| {
                let s = derive_seed(derive_seed(seed, round << 32), k as u64);
                canonical(&louvain_labels(&cbase, &cq, s))
            })
            .collect();
        meta += 1;
        converged = all_agree(&parts);
        current = coassignment_matrix(&parts);
    }

    let chosen = if converged {
        parts.swap_remove(0)
    } else {
        log::warn!("consensus did not converge after {meta} meta-iterations; keeping the best-modularity run");
        let mut best = 0;
        let mut best_q = f64::NEG_INFINITY;
        for (k, p) in parts.iter().enumerate() {
            let zero: Vec<usize> = p.iter().map(|&c| c - 1).collect();
            let v = quality_of(&base, &q, &zero);
            if v > best_q {
                best_q = v;
                best = k;
            }
        }
        parts.swap_remove(best)
    };
    Ok(ConsensusResult {
        partition: Partition::new(&chosen, Some(gamma), PartitionOrigin::DataDriven),
        coassignment: first,
        runs,
        converged,
        meta_iterations: meta,
    })
}

/// Pair-counting Jaccard `n11 / (n11 + n10 + n01)` over unordered pairs.
/// Two partitions with no co-assigned pair at all (both all singletons)
/// score 1.
pub fn partition_jaccard(p1: &Partition, p2: &Partition) -> Result<f64> {
    if p1.len() != p2.len() {
        return Err(Error::NodeSetMismatch {
            partition: p1.len(),
            network: p2.len(),
        });
    }
    let pairs = |x: u64| x * x.saturating_sub(1) / 2;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut a = vec![0u64; p1.community_count()];
    let mut b = vec![0u64; p2.community_count()];
    for (&x, &y) in p1.labels.iter().zip(&p2.labels) {
        *table.entry((x, y)).or_insert(0) += 1;
        a[x - 1] += 1;
        b[y - 1] += 1;
    }
    let n11: u64 = table.values().map(|&c| pairs(c)).sum();
    let s1: u64 = a.iter().map(|&c| pairs(c)).sum();
    let s2: u64 = b.iter().map(|&c| pairs(c)).sum();
    let union = s1 + s2 - n11;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(n11 as f64 / union as f64)
}

/// `0.50, 0.55, …, 2.00`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=30).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub gamma: f64,
    pub mean_jaccard: f64,
    pub sd_jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSelection {
    pub gamma: f64,
    pub curve: Vec<GammaPoint>,
}

/// Resolution sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSearch {
    pub grid: Vec<f64>,
    /// Consensus partitions per grid value.
    pub repeats: usize,
    /// Louvain runs behind each consensus partition.
    pub consensus_runs: usize,
}

impl Default for GammaSearch {
    fn default() -> Self {
        GammaSearch {
            grid: default_gamma_grid(),
            repeats: 10,
            consensus_runs: 10,
        }
    }
}

/// Grid value maximizing mean Jaccard similarity to `reference`; ties go
/// to the smallest value.
pub fn select_gamma(
    net: &TopicNetwork,
    reference: &Partition,
    grid: &[f64],
    runs_per_gamma: usize,
    seed: u64,
) -> Result<GammaSelection> {
    let search = GammaSearch {
        grid: grid.to_vec(),
        repeats: runs_per_gamma,
        ..GammaSearch::default()
    };
    select_gamma_with(net, reference, &search, seed)
}

pub fn select_gamma_with(
    net: &TopicNetwork,
    reference: &Partition,
    search: &GammaSearch,
    seed: u64,
) -> Result<GammaSelection> {
    let grid = &search.grid;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty resolution grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("resolution grid must be strictly ascending".into()));
    }
    if search.repeats == 0 {
        return Err(Error::InvalidParameter("resolution sweep needs at least one repeat".into()));
    }
    if reference.len() != net.node_count() {
        return Err(Error::NodeSetMismatch {
            partition: reference.len(),
            network: net.node_count(),
        });
    }
    let mut curve = Vec::with_capacity(grid.len());
    for (g, &gamma) in grid.iter().enumerate() {
        let gseed = derive_seed(seed, g as u64);
        let scores: Vec<f64> = (0..search.repeats)
            .map(|r| {
                let c = consensus_partition(net, gamma, search.consensus_runs, derive_seed(gseed, r as u64))?;
                partition_jaccard(&c.partition, reference)
            })
            .collect::<Result<_>>()?;
        let m = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / m;
        let sd = if scores.len() > 1 {
            (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        curve.push(GammaPoint {
            gamma,
            mean_jaccard: mean,
            sd_jaccard: sd,
        });
    }
    let mut best = curve[0];
    for p in &curve[1..] {
        if p.mean_jaccard > best.mean_jaccard + 1e-12 {
            best = *p;
        }
    }
    Ok(GammaSelection {
        gamma: best.gamma,
        curve,
    })
}

/// Size and dominant classifications of one community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityComposition {
    pub community: usize,
    pub size: usize,
    /// Up to three `(classification, fraction)` pairs, largest first.
    pub top_classifications: Vec<(String, f64)>,
}

pub fn composition<S: AsRef<str>>(part: &Partition, classes: &[S]) -> Result<Vec<CommunityComposition>> {
    if part.len() != classes.len() {
        return Err(Error::NodeSetMismatch {
            partition: part.len(),
            network: classes.len(),
        });
    }
    Ok(part
        .communities()
        .into_iter()
        .enumerate()
        .map(|(c, members)| {
            let mut counts: HashMap<&str, usize> = HashMap::new();
            for &m in &members {
                *counts.entry(classes[m].as_ref()).or_insert(0) += 1;
            }
            let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            CommunityComposition {
                community: c + 1,
                size: members.len(),
                top_classifications: ranked
                    .into_iter()
                    .take(3)
                    .map(|(l, k)| (l.to_string(), k as f64 / members.len() as f64))
                    .collect(),
            }
        })
        .collect())
}

/// CSV `topic,community,origin,gamma`.
pub fn write_partition<W: Write>(net: &TopicNetwork, part: &Partition, out: W, manifest_hash: Option<&str>) -> Result<()> {
    if part.len() != net.node_count() {
        return Err(Error::NodeSetMismatch {
            partition: part.len(),
            network: net.node_count(),
        });
    }
    let mut out = out;
    if let Some(h) = manifest_hash {
        writeln!(out, "# manifest: {h}").map_err(|e| Error::io("<partition>", e))?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["topic", "community", "origin", "gamma"])?;
    let gamma = part.gamma.map(|g| g.to_string()).unwrap_or_default();
    for (topic, &c) in net.nodes().iter().zip(&part.labels) {
        wtr.write_record([topic.phrase.as_str(), &c.to_string(), part.origin.as_str(), &gamma])?;
    }
    wtr.flush().map_err(|e| Error::io("<partition>", e))?;
    Ok(())
}

/// CSV `gamma,mean_jaccard,sd_jaccard`.
pub fn write_gamma_curve<W: Write>(curve: &[GammaPoint], out: W, manifest_hash: Option<&str>) -> Result<()> {
    let mut out = out;
    if let Some(h) = manifest_hash {
        writeln!(out, "# manifest: {h}").map_err(|e| Error::io("<gamma curve>", e))?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["gamma", "mean_jaccard", "sd_jaccard"])?;
    for p in curve {
        wtr.write_record([p.gamma.to_string(), p.mean_jaccard.to_string(), p.sd_jaccard.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<gamma curve>", e))?;
    Ok(())
}
