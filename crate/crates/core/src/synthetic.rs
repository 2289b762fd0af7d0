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

//! Seeded generators for benchmark graphs and corpora with known structure.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::community::{Partition, PartitionOrigin};
use crate::corpus::{Corpus, Document, Month};
use crate::error::{Error, Result};
use crate::graphbuild::TopicNetwork;
use crate::nulls::rng_for;

fn block_labels(n: usize, blocks: usize) -> Vec<usize> {
    (0..n).map(|i| i * blocks / n).collect()
}

/// Unit-weight stochastic block graph with equal-sized blocks.
pub fn planted_partition(n: usize, blocks: usize, p_in: f64, p_out: f64, seed: u64) -> Result<(TopicNetwork, Partition)> {
    if blocks == 0 || blocks > n {
        return Err(Error::InvalidParameter(format!("{blocks} blocks for {n} nodes")));
    }
    let mut rng = rng_for(seed);
    let truth = block_labels(n, blocks);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if truth[i] == truth[j] { p_in } else { p_out };
            if rng.random_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    Ok((
        TopicNetwork::from_edges(n, &edges)?,
        Partition::new(&truth, None, PartitionOrigin::Planted),
    ))
}

/// Block graph whose present edges carry exponential weights with block
/// means `means` (row-major `K×K`, symmetric).
pub fn exponential_wsbm(
    n: usize,
    means: &[f64],
    density: f64,
    seed: u64,
) -> Result<(TopicNetwork, Partition)> {
    let k = (means.len() as f64).sqrt().round() as usize;
    if k == 0 || k * k != means.len() || k > n {
        return Err(Error::InvalidParameter("block means must form a square matrix".into()));
    }
    let mut rng = rng_for(seed);
    let truth = block_labels(n, k);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(density) {
                let beta = means[truth[i] * k + truth[j]];
                let exp = Exp::new(1.0 / beta).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                edges.push((i, j, exp.sample(&mut rng).max(f64::MIN_POSITIVE)));
            }
        }
    }
    Ok((
        TopicNetwork::from_edges(n, &edges)?,
        Partition::new(&truth, None, PartitionOrigin::Planted),
    ))
}

/// Unit-weight ring where each node links to its `k/2` nearest neighbours
/// on either side.
pub fn ring_lattice(n: usize, k: usize) -> Result<TopicNetwork> {
    watts_strogatz(n, k, 0.0, 0)
}

/// Watts–Strogatz graph: a ring lattice whose edges are rewired to a
/// uniformly chosen endpoint with probability `p`.
pub fn watts_strogatz(n: usize, k: usize, p: f64, seed: u64) -> Result<TopicNetwork> {
    if k % 2 != 0 || k >= n {
        return Err(Error::InvalidParameter(format!("ring degree {k} must be even and below {n}")));
    }
    let mut rng = rng_for(seed);
    let mut adj = vec![false; n * n];
    for i in 0..n {
        for d in 1..=k / 2 {
            let j = (i + d) % n;
            adj[i * n + j] = true;
            adj[j * n + i] = true;
        }
    }
    for d in 1..=k / 2 {
        for i in 0..n {
            let j = (i + d) % n;
            if !adj[i * n + j] || !rng.random_bool(p) {
                continue;
            }
            let free: Vec<usize> = (0..n).filter(|&t| t != i && !adj[i * n + t]).collect();
            if let Some(&t) = free.choose(&mut rng) {
                adj[i * n + j] = false;
                adj[j * n + i] = false;
                adj[i * n + t] = true;
                adj[t * n + i] = true;
            }
        }
    }
    let weights = adj.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    TopicNetwork::from_weights(n, weights)
}

/// Linear ramp from `start` at the first month to `end` at the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub start: f64,
    pub end: f64,
}

impl Ramp {
    pub fn constant(v: f64) -> Self {
        Ramp { start: v, end: v }
    }

    fn at(&self, t: f64) -> f64 {
        self.start + (self.end - self.start) * t
    }
}

/// Corpus of single-label documents over a grid of class-specific topics.
///
/// Each document draws a class uniformly and includes each topic of its own
/// class with probability `p_in` and every other topic with probability
/// `p_out`. With probability `theme` it also carries one cross-class theme:
/// the `j`-th topic of every class together. Ramps interpolate linearly in
/// time over the span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub classes: usize,
    pub topics_per_class: usize,
    pub docs_per_month: usize,
    pub first: Month,
    pub last: Month,
    pub p_in: Ramp,
    pub p_out: f64,
    pub theme: Ramp,
}

impl SyntheticCorpusSpec {
    pub fn stationary(first: Month, last: Month) -> Self {
        SyntheticCorpusSpec {
            classes: 4,
            topics_per_class: 5,
            docs_per_month: 30,
            first,
            last,
            p_in: Ramp::constant(0.3),
            p_out: 0.05,
            theme: Ramp::constant(0.0),
        }
    }

    pub fn topic_phrase(class: usize, topic: usize) -> String {
        format!("field{class} topic{topic}")
    }

    pub fn class_label(class: usize) -> String {
        format!("class-{class}")
    }

    pub fn generate(&self, seed: u64) -> Result<Corpus> {
        if self.classes == 0 || self.topics_per_class == 0 || self.docs_per_month == 0 {
            return Err(Error::InvalidParameter("synthetic corpus dimensions must be positive".into()));
        }
        let months = self.first.months_until(self.last);
        if months < 0 {
            return Err(Error::InvalidParameter("synthetic corpus span is reversed".into()));
        }
        let mut rng = rng_for(seed);
        let mut docs = Vec::with_capacity((months as usize + 1) * self.docs_per_month);
        for m in 0..=months {
            let date = self.first.offset(m);
            let t = if months == 0 { 0.0 } else { m as f64 / months as f64 };
            let (p_in, theme) = (self.p_in.at(t), self.theme.at(t));
            for k in 0..self.docs_per_month {
                let class = rng.random_range(0..self.classes);
                let mut keywords = Vec::new();
                for c in 0..self.classes {
                    let p = if c == class { p_in } else { self.p_out };
                    for j in 0..self.topics_per_class {
                        if rng.random_bool(p) {
                            keywords.push(Self::topic_phrase(c, j));
                        }
                    }
                }
                if rng.random_bool(theme) {
                    let j = rng.random_range(0..self.topics_per_class);
                    for c in 0..self.classes {
                        let phrase = Self::topic_phrase(c, j);
                        if !keywords.contains(&phrase) {
                            keywords.push(phrase);
                        }
                    }
                }
                docs.push(Document {
                    id: format!("{date}-{k:04}"),
                    date,
                    classifications: vec![Self::class_label(class)],
                    abstract_text: String::new(),
                    keywords,
                });
            }
        }
        Corpus::new(docs)
    }
}
