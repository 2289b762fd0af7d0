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

//! Topic network construction: binary incidence, φ edge weights, negative
//! edge removal and sliding windows.

mod network;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use network::{format_weight, read_network, write_edge_list, write_node_metadata, TopicNetwork, Window};

use crate::corpus::{select_vocabulary_in, Corpus, Month, TopicIndex, TopicVocabulary};
use crate::error::{Error, Result};

/// Documents × topics occurrence indicators, stored sparsely per document.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    doc_ids: Vec<String>,
    topics: Vec<String>,
    rows: Vec<Vec<u32>>,
}

impl IncidenceMatrix {
    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn topic_count(&self) -> usize {
        self.topics.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn cell(&self, doc: usize, topic: usize) -> u8 {
        self.rows[doc].binary_search(&(topic as u32)).is_ok() as u8
    }

    /// Dense 0/1 column for one topic.
    pub fn column(&self, topic: usize) -> Vec<u8> {
        (0..self.doc_count()).map(|d| self.cell(d, topic)).collect()
    }

    /// Build from dense rows of 0/1 cells.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        let mut sparse = Vec::with_capacity(rows.len());
        for r in rows {
            if r.len() != t {
                return Err(Error::LengthMismatch { left: r.len(), right: t });
            }
            let mut row = Vec::new();
            for (j, &c) in r.iter().enumerate() {
                match c {
                    0 => {}
                    1 => row.push(j as u32),
                    _ => return Err(Error::InvalidParameter(format!("incidence cell {c} not in {{0,1}}"))),
                }
            }
            sparse.push(row);
        }
        Ok(IncidenceMatrix {
            doc_ids: (0..rows.len()).map(|i| format!("d{i}")).collect(),
            topics: (0..t).map(|j| format!("t{j}")).collect(),
            rows: sparse,
        })
    }

    fn column_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.topics.len()];
        for row in &self.rows {
            for &t in row {
                counts[t as usize] += 1;
            }
        }
        counts
    }

    /// Pairwise φ; `NaN` where a column is constant.
    pub fn phi_matrix(&self) -> Vec<f64> {
        let n = self.topics.len();
        let cooc = cooccurrence(&self.rows, n);
        phi_from_counts(&cooc, &self.column_counts(), self.doc_count() as u64, n)
    }
}

pub fn build_incidence(corpus: &Corpus, vocab: &TopicVocabulary) -> Result<IncidenceMatrix> {
    let index = TopicIndex::with_candidates(corpus, vocab.phrases().map(String::from));
    let rows: Vec<Vec<u32>> = (0..corpus.len()).map(|d| index.topics_of(d).to_vec()).collect();
    let m = IncidenceMatrix {
        doc_ids: corpus.documents().iter().map(|d| d.id.clone()).collect(),
        topics: vocab.phrases().map(String::from).collect(),
        rows,
    };
    if let Some(absent) = m.column_counts().iter().position(|&c| c == 0) {
        return Err(Error::AbsentTopic(m.topics[absent].clone()));
    }
    Ok(m)
}

/// φ coefficient of two 0/1 vectors; the Pearson correlation of the
/// indicators.
pub fn phi_coefficient(x: &[u8], y: &[u8]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewObservations {
            required: 2,
            actual: x.len(),
        });
    }
    let mut n = [[0u64; 2]; 2];
    for (&a, &b) in x.iter().zip(y) {
        if a > 1 || b > 1 {
            return Err(Error::InvalidParameter("φ inputs must be 0/1".into()));
        }
        n[a as usize][b as usize] += 1;
    }
    let d = x.len() as u64;
    let a = n[1][0] + n[1][1];
    let b = n[0][1] + n[1][1];
    let phi = phi_from_margins(n[1][1], a, b, d);
    if phi.is_nan() {
        return Err(Error::UndefinedCorrelation("constant indicator vector".into()));
    }
    Ok(phi)
}

/// `(n11·D − a·b) / sqrt(a(D−a) b(D−b))`, which equals
/// `(n11 n00 − n10 n01) / sqrt(n1· n0· n·1 n·0)`.
fn phi_from_margins(n11: u64, a: u64, b: u64, d: u64) -> f64 {
    if a == 0 || a == d || b == 0 || b == d {
        return f64::NAN;
    }
    let num = n11 as i128 * d as i128 - a as i128 * b as i128;
    let den = ((a * (d - a)) as f64 * (b * (d - b)) as f64).sqrt();
    num as f64 / den
}

fn cooccurrence(rows: &[Vec<u32>], n: usize) -> Vec<u32> {
    let mut cooc = vec![0u32; n * n];
    for row in rows {
        for (k, &a) in row.iter().enumerate() {
            for &b in &row[k + 1..] {
                cooc[a as usize * n + b as usize] += 1;
            }
        }
    }
    cooc
}

fn phi_from_counts(cooc: &[u32], counts: &[u64], d: u64, n: usize) -> Vec<f64> {
    let mut phi = vec![0.0; n * n];
    phi.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, cell) in row.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            *cell = phi_from_margins(cooc[lo * n + hi] as u64, counts[i], counts[j], d);
        }
    });
    phi
}

/// Sliding-window layout: reach on either side of the center, and the
/// distance between consecutive centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub half_width: u32,
    pub step: u32,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec { half_width: 6, step: 1 }
    }
}

impl WindowSpec {
    /// Centers from the earliest month with a full left flank to the latest
    /// month with a full right flank.
    pub fn centers(&self, span: (Month, Month)) -> Result<Vec<Month>> {
        if self.half_width < 1 || self.step < 1 {
            return Err(Error::InvalidParameter("half_width and step must be ≥ 1".into()));
        }
        let required = 2 * self.half_width + 1;
        let actual = (span.0.months_until(span.1) + 1) as u32;
        if actual < required {
            return Err(Error::SpanTooShort { required, actual });
        }
        let first = span.0.offset(self.half_width as i64);
        let last = span.1.offset(-(self.half_width as i64));
        let count = first.months_until(last) / self.step as i64 + 1;
        Ok((0..count).map(|k| first.offset(k * self.step as i64)).collect())
    }

    pub fn windows(&self, span: (Month, Month)) -> Result<Vec<Window>> {
        Ok(self
            .centers(span)?
            .into_iter()
            .map(|center| Window {
                center,
                half_width: self.half_width,
            })
            .collect())
    }
}

/// A window and the indices of the documents it contains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusWindow {
    pub window: Window,
    pub docs: Vec<usize>,
}

impl CorpusWindow {
    pub fn center(&self) -> Month {
        self.window.center
    }

    pub fn sub_corpus(&self, corpus: &Corpus) -> Result<Corpus> {
        corpus.subset(&self.docs)
    }
}

/// Windows over an explicit per-document date assignment.
pub fn windows_for_dates(dates: &[Month], span: (Month, Month), spec: WindowSpec) -> Result<Vec<CorpusWindow>> {
    let windows = spec.windows(span)?;
    let mut out: Vec<CorpusWindow> = windows
        .into_iter()
        .map(|window| CorpusWindow { window, docs: Vec::new() })
        .collect();
    let first_center = out[0].window.center;
    let hw = spec.half_width as i64;
    let step = spec.step as i64;
    for (d, &m) in dates.iter().enumerate() {
        // Windows k with |center_k − m| ≤ hw.
        let rel = first_center.months_until(m);
        let lo = (rel - hw).max(0);
        let hi = rel + hw;
        let mut k = (lo + step - 1) / step;
        while k * step <= hi && (k as usize) < out.len() {
            out[k as usize].docs.push(d);
            k += 1;
        }
    }
    Ok(out)
}

pub fn generate_windows(corpus: &Corpus, spec: WindowSpec) -> Result<Vec<CorpusWindow>> {
    windows_for_dates(&corpus.dates(), corpus.span(), spec)
}

/// Reusable network builder over one corpus. Indexes topic occurrences once.
pub struct NetworkBuilder<'a> {
    corpus: &'a Corpus,
    index: Arc<TopicIndex>,
    provenance: String,
}

impl<'a> NetworkBuilder<'a> {
    pub fn new(corpus: &'a Corpus) -> Self {
        NetworkBuilder {
            corpus,
            index: Arc::new(TopicIndex::build(corpus)),
            provenance: corpus.content_hash(),
        }
    }

    /// Builder sharing an existing index. The index must describe the same
    /// documents in the same order, as it does for date permutations.
    pub fn with_index(corpus: &'a Corpus, index: Arc<TopicIndex>, provenance: impl Into<String>) -> Result<Self> {
        if index.doc_count() != corpus.len() {
            return Err(Error::LengthMismatch {
                left: index.doc_count(),
                right: corpus.len(),
            });
        }
        Ok(NetworkBuilder {
            corpus,
            index,
            provenance: provenance.into(),
        })
    }

    pub fn shared_index(&self) -> Arc<TopicIndex> {
        Arc::clone(&self.index)
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    pub fn index(&self) -> &TopicIndex {
        &self.index
    }

    /// φ network over the listed documents with negative and undefined
    /// correlations removed.
    pub fn build(&self, docs: &[usize], n: usize, window: Option<Window>) -> Result<TopicNetwork> {
        let net = self.build_signed(docs, n, window)?;
        Ok(net.positive_part())
    }

    /// φ network keeping negative correlations; undefined pairs are 0.
    pub fn build_signed(&self, docs: &[usize], n: usize, window: Option<Window>) -> Result<TopicNetwork> {
        let (vocab, ids) = select_vocabulary_in(&self.index, docs, n)?;
        let labels = self.index.classify(self.corpus, docs, &ids);
        let mut vocab = vocab;
        for (t, l) in vocab.topics.iter_mut().zip(labels) {
            t.classification = l;
        }

        let mut slot = vec![u32::MAX; self.index.phrases().len()];
        for (k, &id) in ids.iter().enumerate() {
            slot[id as usize] = k as u32;
        }
        let rows: Vec<Vec<u32>> = docs
            .iter()
            .map(|&d| {
                let mut r: Vec<u32> = self
                    .index
                    .topics_of(d)
                    .iter()
                    .map(|&t| slot[t as usize])
                    .filter(|&s| s != u32::MAX)
                    .collect();
                r.sort_unstable();
                r
            })
            .collect();
        let mut counts = vec![0u64; n];
        for r in &rows {
            for &t in r {
                counts[t as usize] += 1;
            }
        }
        let cooc = cooccurrence(&rows, n);
        let mut weights = phi_from_counts(&cooc, &counts, docs.len() as u64, n);
        let undefined = weights
            .iter()
            .enumerate()
            .filter(|(k, w)| w.is_nan() && k / n < k % n)
            .count();
        if undefined > 0 {
            log::info!("{undefined} topic pairs with undefined φ set to weight 0");
        }
        for w in weights.iter_mut() {
            if w.is_nan() {
                *w = 0.0;
            }
        }
        TopicNetwork::new(vocab.topics, weights, window, self.provenance.clone())
    }

    pub fn build_window(&self, window: Window, n: usize) -> Result<TopicNetwork> {
        let span = self.corpus.span();
        if window.first() < span.0 || window.last() > span.1 {
            return Err(Error::WindowOutsideSpan {
                center: window.center.to_string(),
                half_width: window.half_width,
                first: span.0.to_string(),
                last: span.1.to_string(),
            });
        }
        let docs: Vec<usize> = self
            .corpus
            .documents()
            .iter()
            .enumerate()
            .filter(|(_, d)| window.contains(d.date))
            .map(|(i, _)| i)
            .collect();
        self.build(&docs, n, Some(window))
    }

    pub fn build_full(&self, n: usize) -> Result<TopicNetwork> {
        let docs: Vec<usize> = (0..self.corpus.len()).collect();
        self.build(&docs, n, None)
    }
}

/// Full-span network, or the network of one window when given.
pub fn build_network(corpus: &Corpus, n: usize, window: Option<Window>) -> Result<TopicNetwork> {
    let builder = NetworkBuilder::new(corpus);
    match window {
        Some(w) => builder.build_window(w, n),
        None => builder.build_full(n),
    }
}
