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

//! Document corpus ingestion, phrase normalization and topic vocabulary
//! selection.
//!
//! Topics are drawn from the keyword sections of the corpus. A document
//! contains a topic when one of its normalized keywords equals the topic
//! phrase, or when the topic's token sequence occurs contiguously in the
//! tokenized abstract. Matching is exact on word boundaries: no stemming,
//! no plural folding.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Label given to topics that only occur in documents without classifications.
pub const UNCLASSIFIED: &str = "unclassified";

/// Calendar month. Ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    year: i32,
    month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidParameter(format!(
                "month {month} out of range 1..=12"
            )));
        }
        Ok(Month { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    /// Months since year 0, January.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        let year = ordinal.div_euclid(12);
        let month = ordinal.rem_euclid(12) + 1;
        Month {
            year: year as i32,
            month: month as u32,
        }
    }

    pub fn offset(self, months: i64) -> Self {
        Month::from_ordinal(self.ordinal() + months)
    }

    /// Number of months from `self` to `other` (negative if `other` is earlier).
    pub fn months_until(self, other: Month) -> i64 {
        other.ordinal() - self.ordinal()
    }

    /// Parses `YYYY-MM` or `YYYY-MM-DD`; the day is validated then discarded.
    pub fn parse_date(s: &str) -> Option<Self> {
        let s = s.trim();
        let parts: Vec<&str> = s.split('-').collect();
        match parts.as_slice() {
            [y, m] if y.len() == 4 && m.len() == 2 => {
                let year = y.parse().ok()?;
                let month = m.parse().ok()?;
                Month::new(year, month).ok()
            }
            [y, m, _] if y.len() == 4 && m.len() == 2 => {
                let date = NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
                use chrono::Datelike;
                Month::new(date.year(), date.month()).ok()
            }
            _ => None,
        }
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Month::parse_date(s).ok_or_else(|| Error::InvalidParameter(format!("bad month `{s}`")))
    }
}

impl Serialize for Month {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Month {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One article record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub date: Month,
    pub classifications: Vec<String>,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub keywords: Vec<String>,
}

impl Document {
    /// Whether `phrase` (already normalized) occurs in this document.
    pub fn contains_phrase(&self, phrase: &str) -> bool {
        if self.keywords.iter().any(|k| normalize_phrase(k) == phrase) {
            return true;
        }
        let needle = tokenize(phrase);
        if needle.is_empty() {
            return false;
        }
        let hay = tokenize(&self.abstract_text);
        hay.windows(needle.len()).any(|w| w == needle.as_slice())
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    span: (Month, Month),
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(Error::MissingField {
                    line: i + 1,
                    field: "id",
                });
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId {
                    line: i + 1,
                    id: doc.id.clone(),
                });
            }
        }
        let first = documents.iter().map(|d| d.date).min().unwrap();
        let last = documents.iter().map(|d| d.date).max().unwrap();
        Ok(Corpus {
            documents,
            span: (first, last),
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn span(&self) -> (Month, Month) {
        self.span
    }

    /// Inclusive month count of the span.
    pub fn span_months(&self) -> u32 {
        (self.span.0.months_until(self.span.1) + 1) as u32
    }

    pub fn dates(&self) -> Vec<Month> {
        self.documents.iter().map(|d| d.date).collect()
    }

    /// Same documents re-paired with `dates` (one per document, in order).
    pub fn with_dates(&self, dates: &[Month]) -> Result<Self> {
        if dates.len() != self.documents.len() {
            return Err(Error::LengthMismatch {
                left: dates.len(),
                right: self.documents.len(),
            });
        }
        let documents = self
            .documents
            .iter()
            .zip(dates)
            .map(|(d, &date)| Document { date, ..d.clone() })
            .collect();
        Corpus::new(documents)
    }

    /// Documents whose index is listed, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Corpus::new(indices.iter().map(|&i| self.documents[i].clone()).collect())
    }

    /// SHA-256 over the documents sorted by id; independent of record order.
    pub fn content_hash(&self) -> String {
        let mut order: Vec<&Document> = self.documents.iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        let mut hasher = Sha256::new();
        for d in order {
            hasher.update(d.id.as_bytes());
            hasher.update([0]);
            hasher.update(d.date.to_string().as_bytes());
            hasher.update([0]);
            for c in &d.classifications {
                hasher.update(c.as_bytes());
                hasher.update([1]);
            }
            hasher.update([0]);
            hasher.update(d.abstract_text.as_bytes());
            hasher.update([0]);
            for k in &d.keywords {
                hasher.update(k.as_bytes());
                hasher.update([1]);
            }
            hasher.update([2]);
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guess from the file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::Usage(format!("unknown corpus format `{other}`"))),
        }
    }
}

pub fn parse_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        CorpusFormat::Jsonl => parse_jsonl(BufReader::new(file)),
        CorpusFormat::Csv => parse_csv(file),
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    date: Option<String>,
    #[serde(default)]
    classifications: Vec<String>,
    #[serde(rename = "abstract", default)]
    abstract_text: String,
    #[serde(default)]
    keywords: Vec<String>,
}

fn record_to_document(raw: RawRecord, line: usize) -> Result<Document> {
    let id = raw
        .id
        .filter(|s| !s.trim().is_empty())
        .ok_or(Error::MissingField { line, field: "id" })?;
    let date_str = raw.date.ok_or(Error::MissingField { line, field: "date" })?;
    let date = Month::parse_date(&date_str).ok_or(Error::BadDate {
        line,
        value: date_str.clone(),
    })?;
    Ok(Document {
        id,
        date,
        classifications: raw
            .classifications
            .into_iter()
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect(),
        abstract_text: raw.abstract_text,
        keywords: raw.keywords,
    })
}

fn check_duplicate(seen: &mut HashMap<String, usize>, doc: &Document, line: usize) -> Result<()> {
    if seen.insert(doc.id.clone(), line).is_some() {
        return Err(Error::DuplicateId {
            line,
            id: doc.id.clone(),
        });
    }
    Ok(())
}

/// One JSON object per line; blank lines are skipped.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut docs = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Schema {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: lineno,
            message: e.to_string(),
        })?;
        let doc = record_to_document(raw, lineno)?;
        check_duplicate(&mut seen, &doc, lineno)?;
        docs.push(doc);
    }
    Corpus::new(docs)
}

/// Header row `id,date,classifications,abstract,keywords`; list cells are
/// `;`-delimited.
pub fn parse_csv<R: Read>(reader: R) -> Result<Corpus> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| headers.iter().position(|h| h.trim() == name);
    let (id_col, date_col) = (col("id"), col("date"));
    let (class_col, abs_col, kw_col) = (col("classifications"), col("abstract"), col("keywords"));
    let split = |cell: Option<&str>| -> Vec<String> {
        cell.map(|c| {
            c.split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        })
        .unwrap_or_default()
    };

    let mut docs = Vec::new();
    let mut seen = HashMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Schema {
            line: e.position().map(|p| p.line() as usize).unwrap_or(i + 2),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let get = |c: Option<usize>| c.and_then(|c| record.get(c));
        let raw = RawRecord {
            id: get(id_col).map(String::from),
            date: get(date_col).map(String::from),
            classifications: split(get(class_col)),
            abstract_text: get(abs_col).unwrap_or_default().to_string(),
            keywords: split(get(kw_col)),
        };
        let doc = record_to_document(raw, line)?;
        check_duplicate(&mut seen, &doc, line)?;
        docs.push(doc);
    }
    Corpus::new(docs)
}

fn map_char(c: char) -> char {
    match c {
        '\u{2010}'..='\u{2015}' | '\u{2212}' | '\u{FE58}' | '\u{FE63}' | '\u{FF0D}' => '-',
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' => '\'',
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' => '"',
        _ => c,
    }
}

fn strip_boundary_punct(s: &str) -> &str {
    s.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Lowercase, map dashes and curly quotes, collapse whitespace and strip
/// punctuation at the phrase boundaries. Interior punctuation is kept.
pub fn normalize_phrase(raw: &str) -> String {
    let mapped: String = raw.chars().map(map_char).flat_map(char::to_lowercase).collect();
    let collapsed = mapped.split_whitespace().collect::<Vec<_>>().join(" ");
    strip_boundary_punct(&collapsed).to_string()
}

/// Word tokens for phrase matching: the normalization above applied per
/// whitespace-separated word.
pub fn tokenize(text: &str) -> Vec<String> {
    text.chars()
        .map(map_char)
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .split_whitespace()
        .map(strip_boundary_punct)
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

/// Union of all normalized keyword phrases.
pub fn extract_candidate_topics(corpus: &Corpus) -> BTreeSet<String> {
    corpus
        .documents()
        .iter()
        .flat_map(|d| d.keywords.iter())
        .map(|k| normalize_phrase(k))
        .filter(|k| !k.is_empty())
        .collect()
}

pub fn topic_prevalence(corpus: &Corpus, phrase: &str) -> Result<f64> {
    if phrase.is_empty() {
        return Err(Error::EmptyPhrase);
    }
    let hits = corpus
        .documents()
        .par_iter()
        .filter(|d| d.contains_phrase(phrase))
        .count();
    Ok(hits as f64 / corpus.len() as f64)
}

/// Precomputed document → topic occurrences for a fixed candidate list.
///
/// Occurrence depends only on document content, so one index serves every
/// window and every date permutation of the same corpus.
#[derive(Debug, Clone)]
pub struct TopicIndex {
    phrases: Vec<String>,
    doc_topics: Vec<Vec<u32>>,
}

impl TopicIndex {
    /// Index over all keyword-derived candidates of `corpus`.
    pub fn build(corpus: &Corpus) -> Self {
        Self::with_candidates(corpus, extract_candidate_topics(corpus))
    }

    /// Index over the given (normalized) phrases, kept in the given order.
    pub fn with_candidates<I>(corpus: &Corpus, candidates: I) -> Self
    where
        I: IntoIterator<Item = String>,
    {
        let phrases: Vec<String> = candidates.into_iter().collect();
        let mut by_phrase: HashMap<&str, u32> = HashMap::with_capacity(phrases.len());
        let mut by_tokens: HashMap<String, Vec<u32>> = HashMap::with_capacity(phrases.len());
        let mut max_words = 0;
        for (i, p) in phrases.iter().enumerate() {
            by_phrase.insert(p.as_str(), i as u32);
            let toks = tokenize(p);
            if toks.is_empty() {
                continue;
            }
            max_words = max_words.max(toks.len());
            by_tokens.entry(toks.join(" ")).or_default().push(i as u32);
        }

        let doc_topics = corpus
            .documents()
            .par_iter()
            .map(|doc| {
                let mut found: Vec<u32> = doc
                    .keywords
                    .iter()
                    .filter_map(|k| by_phrase.get(normalize_phrase(k).as_str()).copied())
                    .collect();
                let toks = tokenize(&doc.abstract_text);
                let mut key = String::new();
                for start in 0..toks.len() {
                    key.clear();
                    for len in 1..=max_words.min(toks.len() - start) {
                        if len > 1 {
                            key.push(' ');
                        }
                        key.push_str(&toks[start + len - 1]);
                        if let Some(ids) = by_tokens.get(key.as_str()) {
                            found.extend_from_slice(ids);
                        }
                    }
                }
                found.sort_unstable();
                found.dedup();
                found
            })
            .collect();
        TopicIndex { phrases, doc_topics }
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    pub fn phrase(&self, id: u32) -> &str {
        &self.phrases[id as usize]
    }

    /// Sorted candidate ids present in document `doc`.
    pub fn topics_of(&self, doc: usize) -> &[u32] {
        &self.doc_topics[doc]
    }

    pub fn doc_count(&self) -> usize {
        self.doc_topics.len()
    }

    /// Number of listed documents containing each candidate.
    pub fn counts(&self, docs: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.phrases.len()];
        for &d in docs {
            for &t in &self.doc_topics[d] {
                counts[t as usize] += 1;
            }
        }
        counts
    }

    /// Top `n` candidates by document count over `docs`, ties broken by
    /// ascending phrase. Returns `(candidate id, count)` pairs.
    pub(crate) fn top_topics(&self, docs: &[usize], n: usize) -> Result<Vec<(u32, u32)>> {
        let counts = self.counts(docs);
        let mut ranked: Vec<(u32, u32)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i as u32, c))
            .collect();
        if ranked.len() < n {
            return Err(Error::InsufficientTopics {
                requested: n,
                available: ranked.len(),
            });
        }
        ranked.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| self.phrases[a.0 as usize].cmp(&self.phrases[b.0 as usize]))
        });
        ranked.truncate(n);
        Ok(ranked)
    }

    /// Modal classification of each listed topic over `docs`.
    pub(crate) fn classify(&self, corpus: &Corpus, docs: &[usize], topics: &[u32]) -> Vec<String> {
        let slot: HashMap<u32, usize> = topics.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let mut tallies: Vec<BTreeMap<&str, u32>> = vec![BTreeMap::new(); topics.len()];
        for &d in docs {
            let doc = &corpus.documents()[d];
            if doc.classifications.is_empty() {
                continue;
            }
            let labels: BTreeSet<&str> = doc.classifications.iter().map(String::as_str).collect();
            for t in &self.doc_topics[d] {
                if let Some(&s) = slot.get(t) {
                    for &label in &labels {
                        *tallies[s].entry(label).or_insert(0) += 1;
                    }
                }
            }
        }
        tallies
            .iter()
            .zip(topics)
            .map(|(tally, &t)| modal_label(tally, self.phrase(t)))
            .collect()
    }
}

fn modal_label(tally: &BTreeMap<&str, u32>, phrase: &str) -> String {
    let Some(best) = tally.values().copied().max() else {
        return UNCLASSIFIED.to_string();
    };
    // BTreeMap iterates labels in ascending order, so the first maximum is
    // the lexicographically smallest.
    let mut winners = tally.iter().filter(|(_, &c)| c == best).map(|(l, _)| *l);
    let label = winners.next().unwrap();
    let others: Vec<&str> = winners.collect();
    if !others.is_empty() {
        log::debug!("classification tie for `{phrase}`: {label} chosen over {others:?}");
    }
    label.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub phrase: String,
    pub prevalence: f64,
    pub classification: String,
}

/// Topics sorted by descending prevalence, ties by ascending phrase.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TopicVocabulary {
    pub topics: Vec<Topic>,
}

impl TopicVocabulary {
    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.topics.iter().map(|t| t.phrase.as_str())
    }

    pub fn classifications(&self) -> Vec<String> {
        self.topics.iter().map(|t| t.classification.clone()).collect()
    }
}

fn build_vocabulary(index: &TopicIndex, docs: &[usize], selected: &[(u32, u32)]) -> TopicVocabulary {
    let total = docs.len() as f64;
    TopicVocabulary {
        topics: selected
            .iter()
            .map(|&(id, count)| Topic {
                phrase: index.phrase(id).to_string(),
                prevalence: count as f64 / total,
                classification: UNCLASSIFIED.to_string(),
            })
            .collect(),
    }
}

pub fn select_vocabulary(corpus: &Corpus, n: usize) -> Result<TopicVocabulary> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("vocabulary size {n} < 2")));
    }
    let index = TopicIndex::build(corpus);
    let docs: Vec<usize> = (0..corpus.len()).collect();
    let selected = index.top_topics(&docs, n)?;
    Ok(build_vocabulary(&index, &docs, &selected))
}

/// Select over a subset of documents of an indexed corpus.
pub(crate) fn select_vocabulary_in(
    index: &TopicIndex,
    docs: &[usize],
    n: usize,
) -> Result<(TopicVocabulary, Vec<u32>)> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("vocabulary size {n} < 2")));
    }
    let selected = index.top_topics(docs, n)?;
    let vocab = build_vocabulary(index, docs, &selected);
    Ok((vocab, selected.into_iter().map(|(id, _)| id).collect()))
}

/// Label each topic with the most common classification among the documents
/// containing it. Every label of a multi-label document counts once.
pub fn assign_classifications(corpus: &Corpus, vocab: &TopicVocabulary) -> TopicVocabulary {
    let index = TopicIndex::with_candidates(corpus, vocab.phrases().map(String::from));
    let docs: Vec<usize> = (0..corpus.len()).collect();
    let ids: Vec<u32> = (0..vocab.len() as u32).collect();
    let labels = index.classify(corpus, &docs, &ids);
    let mut out = vocab.clone();
    for (topic, label) in out.topics.iter_mut().zip(labels) {
        topic.classification = label;
    }
    out
}
