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

//! End-to-end runs: configuration, stage caching and artifact writing.
//!
//! Every CSV artifact starts with a `# manifest: <hash>` line and every JSON
//! artifact carries a `manifest_hash` field. The hash covers the corpus
//! content and every setting that can change a result; worker count and
//! output location are excluded. Expensive stages are cached as JSON under
//! `<out>/cache`, keyed by a hash of their own inputs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::community::{
    composition, consensus_partition, default_gamma_grid, modularity, partition_jaccard, select_gamma_with,
    write_gamma_curve, write_partition, CommunityComposition, GammaPoint, GammaSearch, Partition,
};
use crate::corpus::{parse_corpus, Corpus, CorpusFormat, Month, UNCLASSIFIED};
use crate::error::{Error, Result, ResultExt};
use crate::graphbuild::{format_weight, write_edge_list, write_node_metadata, NetworkBuilder, TopicNetwork, WindowSpec};
use crate::metrics::{
    clustering_barrat, compute_metrics, global_efficiency, small_world_propensity, GraphMetrics, MetricsReport,
    SmallWorld,
};
use crate::nulls::{derive_seed, EnsembleManifest, NullEnsemble, RewireConfig};
use crate::scoring::{
    compare_dependent_correlations, compare_partition_deviances, correlation_p_value, disciplinarity,
    partial_correlation, pearson, permutation_p, residualize, spline_interpolate_monthly, DependentCorrelationTest,
    DevianceComparison,
};
use crate::temporal::{temporal_analysis, Measure, TemporalAnalysis, TemporalConfig, TrendRow};

const STREAM_BUILD: u64 = 1;
const STREAM_NULLS: u64 = 2;
const STREAM_CONSENSUS: u64 = 3;
const STREAM_GAMMA: u64 = 4;
const STREAM_SIGNED: u64 = 5;
const STREAM_TEMPORAL: u64 = 6;

fn stream(seed: u64, stream: u64, n: usize) -> u64 {
    derive_seed(derive_seed(seed, stream), n as u64)
}

/// Resolution parameter: a fixed value or a sweep against the
/// classification partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaChoice {
    Fixed(f64),
    Auto,
}

impl FromStr for GammaChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GammaChoice::Auto);
        }
        match s.parse::<f64>() {
            Ok(g) if g > 0.0 && g.is_finite() => Ok(GammaChoice::Fixed(g)),
            _ => Err(Error::Usage(format!("gamma must be a positive number or `auto`, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub format: Option<CorpusFormat>,
    pub n: Vec<usize>,
    pub half_width: u32,
    pub step: u32,
    pub gamma: GammaChoice,
    /// Consensus partitions per grid value when `gamma` is `auto`.
    pub gamma_repeats: usize,
    /// Louvain runs behind each consensus partition of the sweep.
    pub gamma_runs: usize,
    pub runs: usize,
    pub nulls: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub impact: Option<PathBuf>,
}

/// Settings as read from flags or a config file, before defaults apply.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialConfig {
    pub input: Option<PathBuf>,
    pub format: Option<CorpusFormat>,
    pub n: Option<Vec<usize>>,
    pub half_width: Option<u32>,
    pub step: Option<u32>,
    pub gamma: Option<GammaChoice>,
    pub gamma_repeats: Option<usize>,
    pub gamma_runs: Option<usize>,
    pub runs: Option<usize>,
    pub nulls: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub impact: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("invalid value `{value}` for `{key}`")))
}

impl PartialConfig {
    /// Flat `key = value` lines; `#` starts a comment. Keys mirror the long
    /// flag names; `n` takes a comma- or space-separated list.
    pub fn parse_file(text: &str) -> Result<Self> {
        let mut cfg = PartialConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("config line {}: expected key=value", lineno + 1)))?;
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            match key.as_str() {
                "input" => cfg.input = Some(value.into()),
                "format" => cfg.format = Some(value.parse().map_err(|_| Error::Usage(format!("unknown format `{value}`")))?),
                "n" => {
                    cfg.n = Some(
                        value
                            .split(|c: char| c == ',' || c.is_whitespace())
                            .filter(|s| !s.is_empty())
                            .map(|s| parse_value("n", s))
                            .collect::<Result<_>>()?,
                    )
                }
                "half-width" => cfg.half_width = Some(parse_value(&key, value)?),
                "step" => cfg.step = Some(parse_value(&key, value)?),
                "gamma" => cfg.gamma = Some(value.parse()?),
                "gamma-repeats" => cfg.gamma_repeats = Some(parse_value(&key, value)?),
                "gamma-runs" => cfg.gamma_runs = Some(parse_value(&key, value)?),
                "runs" => cfg.runs = Some(parse_value(&key, value)?),
                "nulls" => cfg.nulls = Some(parse_value(&key, value)?),
                "seed" => cfg.seed = Some(parse_value(&key, value)?),
                "out" => cfg.out = Some(value.into()),
                "threads" => cfg.threads = Some(parse_value(&key, value)?),
                "impact" => cfg.impact = Some(value.into()),
                other => return Err(Error::Usage(format!("config line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        Ok(cfg)
    }

    /// Values set in `other` take precedence.
    pub fn overridden_by(self, other: PartialConfig) -> Self {
        PartialConfig {
            input: other.input.or(self.input),
            format: other.format.or(self.format),
            n: other.n.or(self.n),
            half_width: other.half_width.or(self.half_width),
            step: other.step.or(self.step),
            gamma: other.gamma.or(self.gamma),
            gamma_repeats: other.gamma_repeats.or(self.gamma_repeats),
            gamma_runs: other.gamma_runs.or(self.gamma_runs),
            runs: other.runs.or(self.runs),
            nulls: other.nulls.or(self.nulls),
            seed: other.seed.or(self.seed),
            out: other.out.or(self.out),
            threads: other.threads.or(self.threads),
            impact: other.impact.or(self.impact),
        }
    }

    pub fn resolve(self) -> Result<RunConfig> {
        let input = self.input.ok_or_else(|| Error::Usage("--input is required".into()))?;
        let seed = self.seed.ok_or_else(|| Error::Usage("--seed is required".into()))?;
        let mut n = self.n.unwrap_or_else(|| vec![1000]);
        n.dedup();
        let cfg = RunConfig {
            input,
            format: self.format,
            n,
            half_width: self.half_width.unwrap_or(6),
            step: self.step.unwrap_or(1),
            gamma: self.gamma.unwrap_or(GammaChoice::Auto),
            gamma_repeats: self.gamma_repeats.unwrap_or(10),
            gamma_runs: self.gamma_runs.unwrap_or(10),
            runs: self.runs.unwrap_or(100),
            nulls: self.nulls.unwrap_or(100),
            seed,
            out: self.out.unwrap_or_else(|| PathBuf::from("topicnet-out")),
            threads: self.threads,
            impact: self.impact,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("half-width", self.half_width as usize),
            ("step", self.step as usize),
            ("gamma-repeats", self.gamma_repeats),
            ("gamma-runs", self.gamma_runs),
            ("runs", self.runs),
            ("nulls", self.nulls),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Usage(format!("--{name} must be positive")));
            }
        }
        if self.n.is_empty() || self.n.iter().any(|&n| n < 2) {
            return Err(Error::Usage("--n values must be at least 2".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Usage("--threads must be positive".into()));
        }
        Ok(())
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec {
            half_width: self.half_width,
            step: self.step,
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

#[derive(Serialize)]
struct ManifestFields<'a> {
    tool: &'a str,
    version: &'a str,
    corpus: &'a str,
    impact: Option<&'a str>,
    n: &'a [usize],
    half_width: u32,
    step: u32,
    gamma: GammaChoice,
    gamma_repeats: usize,
    gamma_runs: usize,
    runs: usize,
    nulls: usize,
    seed: u64,
}

/// A loaded run: configuration, corpus and manifest hash.
pub struct Run {
    pub config: RunConfig,
    pub corpus: Corpus,
    pub corpus_hash: String,
    pub manifest_hash: String,
}

impl Run {
    pub fn load(config: RunConfig) -> Result<Self> {
        let format = config.format.unwrap_or_else(|| CorpusFormat::from_path(&config.input));
        let corpus = parse_corpus(&config.input, format).context(|| "corpus".to_string())?;
        let corpus_hash = corpus.content_hash();
        let impact_hash = match &config.impact {
            Some(path) => Some(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?)),
            None => None,
        };
        let manifest_hash = hash_json(&ManifestFields {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            corpus: &corpus_hash,
            impact: impact_hash.as_deref(),
            n: &config.n,
            half_width: config.half_width,
            step: config.step,
            gamma: config.gamma,
            gamma_repeats: config.gamma_repeats,
            gamma_runs: config.gamma_runs,
            runs: config.runs,
            nulls: config.nulls,
            seed: config.seed,
        })?;
        fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
        Ok(Run {
            config,
            corpus,
            corpus_hash,
            manifest_hash,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    fn manifest(&self) -> Option<&str> {
        Some(&self.manifest_hash)
    }

    /// Load a cached stage result or compute and store it.
    fn cached<K, T, F>(&self, stage: &str, key: &K, compute: F) -> Result<T>
    where
        K: Serialize,
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        #[derive(Serialize)]
        struct Key<'a, K> {
            stage: &'a str,
            version: &'a str,
            corpus: &'a str,
            key: &'a K,
        }
        let hash = hash_json(&Key {
            stage,
            version: env!("CARGO_PKG_VERSION"),
            corpus: &self.corpus_hash,
            key,
        })?;
        let dir = self.path("cache");
        let file = dir.join(format!("{stage}-{}.json", &hash[..16]));
        if let Ok(bytes) = fs::read(&file) {
            match serde_json::from_slice(&bytes) {
                Ok(v) => {
                    log::info!("stage `{stage}` loaded from cache");
                    return Ok(v);
                }
                Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", file.display()),
            }
        }
        let value = compute()?;
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let tmp = file.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec(&value)?).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &file).map_err(|e| Error::io(&file, e))?;
        Ok(value)
    }

    fn create(&self, name: &str) -> Result<BufWriter<fs::File>> {
        let path = self.path(name);
        Ok(BufWriter::new(fs::File::create(&path).map_err(|e| Error::io(&path, e))?))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w).map_err(|e| Error::io(self.path(name), e))?;
        w.flush().map_err(|e| Error::io(self.path(name), e))
    }

    /// CSV with the manifest comment line.
    fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = self.create(name)?;
        writeln!(w, "# manifest: {}", self.manifest_hash).map_err(|e| Error::io(self.path(name), e))?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(header)?;
        for r in rows {
            wtr.write_record(r)?;
        }
        wtr.flush().map_err(|e| Error::io(self.path(name), e))
    }

    fn builder(&self) -> NetworkBuilder<'_> {
        NetworkBuilder::new(&self.corpus)
    }

    fn full_network(&self, builder: &NetworkBuilder<'_>, n: usize) -> Result<TopicNetwork> {
        builder.build_full(n).context(|| format!("network with {n} topics"))
    }
}

fn num(v: f64) -> String {
    format_weight(v)
}

// ---------------------------------------------------------------- build

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub name: String,
    pub r: f64,
    pub p: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullComparison {
    pub nulls: usize,
    pub efficiency_null_mean: f64,
    pub clustering_null_mean: f64,
    pub swp_null_mean: f64,
    /// Permutation p that the observed efficiency is lower than the nulls'.
    pub p_efficiency_lower: f64,
    /// Permutation p that the observed mean clustering is higher.
    pub p_clustering_higher: f64,
    /// Permutation p that the observed small-world propensity is higher.
    pub p_swp_higher: f64,
    pub max_strength_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub manifest_hash: String,
    pub n: usize,
    pub documents: usize,
    pub edges: usize,
    pub graph: GraphMetrics,
    pub small_world: SmallWorld,
    pub correlations: Vec<CorrelationRecord>,
    pub null_comparison: NullComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BuildStage {
    metrics: MetricsReport,
    graph: GraphMetrics,
    small_world: SmallWorld,
    correlations: Vec<CorrelationRecord>,
    null_comparison: NullComparison,
}

fn partial_record(name: &str, x: &[f64], y: &[f64], z: &[f64]) -> Result<CorrelationRecord> {
    let r = partial_correlation(x, y, z)?;
    Ok(CorrelationRecord {
        name: name.into(),
        r,
        p: correlation_p_value(r, x.len() as f64 - 3.0)?,
        method: "pearson partial correlation, t test with n-3 df".into(),
    })
}

fn build_stage(net: &TopicNetwork, config: &RunConfig, n: usize) -> Result<BuildStage> {
    let seed = stream(config.seed, STREAM_BUILD, n);
    let (nodes, graph, small_world) = compute_metrics(net, seed)?;
    let k: Vec<f64> = nodes.degree.iter().map(|&d| d as f64).collect();
    let correlations = vec![
        partial_record("betweenness~degree | strength", &nodes.betweenness, &k, &nodes.strength)?,
        partial_record("betweenness~strength | degree", &nodes.betweenness, &nodes.strength, &k)?,
    ];

    let ensemble = NullEnsemble::rewired(net, stream(config.seed, STREAM_NULLS, n), config.nulls, &RewireConfig::default())?;
    let null_stats: Vec<(f64, f64, f64)> = ensemble
        .members
        .par_iter()
        .enumerate()
        .map(|(k, null)| {
            let eff = global_efficiency(null)?;
            let c = clustering_barrat(null).mean;
            let swp = small_world_propensity(null, derive_seed(seed, k as u64 + 1))?.phi;
            Ok((eff, c, swp))
        })
        .collect::<Result<_>>()?;
    let effs: Vec<f64> = null_stats.iter().map(|s| s.0).collect();
    let cs: Vec<f64> = null_stats.iter().map(|s| s.1).collect();
    let swps: Vec<f64> = null_stats.iter().map(|s| s.2).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let null_comparison = NullComparison {
        nulls: effs.len(),
        efficiency_null_mean: mean(&effs),
        clustering_null_mean: mean(&cs),
        swp_null_mean: mean(&swps),
        p_efficiency_lower: permutation_p(graph.efficiency, &effs, |null, obs| null <= obs),
        p_clustering_higher: permutation_p(graph.mean_clustering, &cs, |null, obs| null >= obs),
        p_swp_higher: permutation_p(small_world.phi, &swps, |null, obs| null >= obs),
        max_strength_error: ensemble.manifest().preservation_report.max_strength_error,
    };
    Ok(BuildStage {
        metrics: MetricsReport::new(net, &nodes, &graph),
        graph,
        small_world,
        correlations,
        null_comparison,
    })
}

#[derive(Serialize)]
struct StageKey<'a> {
    n: usize,
    seed: u64,
    nulls: usize,
    runs: usize,
    extra: &'a str,
}

/// Full-span networks, node metadata and metrics for every requested size.
pub fn cmd_build(run: &Run) -> Result<Vec<BuildReport>> {
    let builder = run.builder();
    let mut reports = Vec::new();
    let mut summary = Vec::new();
    for &n in &run.config.n {
        let net = run.full_network(&builder, n)?;
        let mut w = run.create(&format!("edges_n{n}.csv"))?;
        write_edge_list(&net, &mut w, run.manifest())?;
        w.flush().map_err(|e| Error::io(run.path(&format!("edges_n{n}.csv")), e))?;
        write_node_metadata(&net, run.create(&format!("nodes_n{n}.json"))?, run.manifest())?;

        let key = StageKey {
            n,
            seed: run.config.seed,
            nulls: run.config.nulls,
            runs: 0,
            extra: "",
        };
        let stage = run
            .cached("build", &key, || build_stage(&net, &run.config, n))
            .context(|| format!("metrics for {n} topics"))?;
        let mut metrics = stage.metrics.clone();
        metrics.manifest_hash = Some(run.manifest_hash.clone());
        run.write_json(&format!("metrics_n{n}.json"), &metrics)?;

        let report = BuildReport {
            manifest_hash: run.manifest_hash.clone(),
            n,
            documents: run.corpus.len(),
            edges: net.edge_count(),
            graph: stage.graph.clone(),
            small_world: stage.small_world,
            correlations: stage.correlations.clone(),
            null_comparison: stage.null_comparison.clone(),
        };
        run.write_json(&format!("build_n{n}.json"), &report)?;
        let nc = &report.null_comparison;
        summary.push(vec![
            n.to_string(),
            report.edges.to_string(),
            num(report.graph.efficiency),
            num(nc.efficiency_null_mean),
            num(nc.p_efficiency_lower),
            num(report.graph.mean_clustering),
            num(nc.clustering_null_mean),
            num(nc.p_clustering_higher),
            num(report.small_world.phi),
            num(nc.swp_null_mean),
            num(nc.p_swp_higher),
            num(report.correlations[0].r),
            num(report.correlations[1].r),
            num(report.graph.path_length),
            report.graph.disconnected_flag.to_string(),
        ]);
        reports.push(report);
    }
    run.write_csv(
        "build_summary.csv",
        &[
            "n",
            "edges",
            "efficiency",
            "efficiency_null_mean",
            "p_efficiency_lower",
            "clustering",
            "clustering_null_mean",
            "p_clustering_higher",
            "swp",
            "swp_null_mean",
            "p_swp_higher",
            "r_betweenness_degree",
            "r_betweenness_strength",
            "path_length",
            "disconnected",
        ],
        &summary,
    )?;
    Ok(reports)
}

// ---------------------------------------------------------------- nulls

/// Degree- and strength-preserving null networks of each full network.
pub fn cmd_nulls(run: &Run) -> Result<Vec<EnsembleManifest>> {
    let builder = run.builder();
    let mut manifests = Vec::new();
    for &n in &run.config.n {
        let net = run.full_network(&builder, n)?;
        let ensemble = NullEnsemble::rewired(&net, stream(run.config.seed, STREAM_NULLS, n), run.config.nulls, &RewireConfig::default())?;
        let dir = format!("nulls_n{n}");
        fs::create_dir_all(run.path(&dir)).map_err(|e| Error::io(run.path(&dir), e))?;
        let mut rows = Vec::new();
        for (k, (member, report)) in ensemble.members.iter().zip(&ensemble.reports).enumerate() {
            let name = format!("{dir}/null_{k:03}.csv");
            let mut w = run.create(&name)?;
            write_edge_list(member, &mut w, run.manifest())?;
            w.flush().map_err(|e| Error::io(run.path(&name), e))?;
            rows.push(vec![
                k.to_string(),
                derive_seed(ensemble.base_seed, k as u64).to_string(),
                report.swaps_accepted.to_string(),
                num(report.max_strength_error),
                report.degree_exact.to_string(),
            ]);
        }
        run.write_csv(
            &format!("{dir}/members.csv"),
            &["member", "seed", "swaps_accepted", "max_strength_error", "degree_exact"],
            &rows,
        )?;
        let mut manifest = ensemble.manifest();
        manifest.manifest_hash = Some(run.manifest_hash.clone());
        run.write_json(&format!("{dir}/manifest.json"), &manifest)?;
        manifests.push(manifest);
    }
    Ok(manifests)
}

// ---------------------------------------------------------------- communities

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleCoverage {
    pub articles: usize,
    /// Share of articles with more than one classification label.
    pub multi_classified: f64,
    /// Share of articles whose vocabulary topics carry more than one
    /// topic classification.
    pub multi_discipline_topics: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityReport {
    pub manifest_hash: String,
    pub n: usize,
    pub gamma: f64,
    pub gamma_selected_automatically: bool,
    pub communities_data_driven: usize,
    pub communities_classification: usize,
    pub modularity_data_driven: f64,
    pub modularity_classification: f64,
    pub consensus_converged: bool,
    pub consensus_meta_iterations: usize,
    pub disciplinarity_data_driven: f64,
    pub disciplinarity_classification: f64,
    /// First partition: classification; second: data-driven.
    pub deviance_comparison: Option<DevianceComparison>,
    pub signed_consensus_jaccard: Option<f64>,
    pub coverage: ArticleCoverage,
    pub composition: Vec<CommunityComposition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CommunityStage {
    gamma: f64,
    curve: Option<Vec<GammaPoint>>,
    partition: Partition,
    converged: bool,
    meta_iterations: usize,
    signed_partition: Option<Partition>,
}

fn community_stage(run: &Run, builder: &NetworkBuilder<'_>, net: &TopicNetwork, n: usize) -> Result<CommunityStage> {
    let cfg = &run.config;
    let classes = Partition::from_classifications(&net.classifications());
    let (gamma, curve) = match cfg.gamma {
        GammaChoice::Fixed(g) => (g, None),
        GammaChoice::Auto => {
            let search = GammaSearch {
                grid: default_gamma_grid(),
                repeats: cfg.gamma_repeats,
                consensus_runs: cfg.gamma_runs.max(2),
            };
            let sel = select_gamma_with(net, &classes, &search, stream(cfg.seed, STREAM_GAMMA, n))?;
            (sel.gamma, Some(sel.curve))
        }
    };
    let consensus = consensus_partition(net, gamma, cfg.runs.max(2), stream(cfg.seed, STREAM_CONSENSUS, n))?;
    let docs: Vec<usize> = (0..run.corpus.len()).collect();
    let signed = builder.build_signed(&docs, n, None)?;
    let signed_partition = if signed.has_negative() {
        Some(consensus_partition(&signed, gamma, cfg.runs.max(2), stream(cfg.seed, STREAM_SIGNED, n))?.partition)
    } else {
        None
    };
    Ok(CommunityStage {
        gamma,
        curve,
        partition: consensus.partition,
        converged: consensus.converged,
        meta_iterations: consensus.meta_iterations,
        signed_partition,
    })
}

fn article_coverage(corpus: &Corpus, builder: &NetworkBuilder<'_>, net: &TopicNetwork) -> ArticleCoverage {
    let topic_class: HashMap<&str, &str> = net
        .nodes()
        .iter()
        .map(|t| (t.phrase.as_str(), t.classification.as_str()))
        .collect();
    let index = builder.index();
    let mut multi_label = 0;
    let mut multi_topic = 0;
    for (d, doc) in corpus.documents().iter().enumerate() {
        let labels: BTreeSet<&str> = doc.classifications.iter().map(String::as_str).collect();
        if labels.len() > 1 {
            multi_label += 1;
        }
        let fields: BTreeSet<&str> = index
            .topics_of(d)
            .iter()
            .filter_map(|&t| topic_class.get(index.phrase(t)).copied())
            .filter(|&c| c != UNCLASSIFIED)
            .collect();
        if fields.len() > 1 {
            multi_topic += 1;
        }
    }
    let total = corpus.len() as f64;
    ArticleCoverage {
        articles: corpus.len(),
        multi_classified: multi_label as f64 / total,
        multi_discipline_topics: multi_topic as f64 / total,
    }
}

/// Classification and data-driven partitions with their comparison.
pub fn cmd_communities(run: &Run) -> Result<Vec<CommunityReport>> {
    let builder = run.builder();
    let mut reports = Vec::new();
    for &n in &run.config.n {
        let net = run.full_network(&builder, n)?;
        let class_labels = net.classifications();
        let classes = Partition::from_classifications(&class_labels);
        let key = StageKey {
            n,
            seed: run.config.seed,
            nulls: 0,
            runs: run.config.runs,
            extra: &format!(
                "{:?}/{}/{}",
                run.config.gamma, run.config.gamma_repeats, run.config.gamma_runs
            ),
        };
        let stage = run
            .cached("communities", &key, || community_stage(run, &builder, &net, n))
            .context(|| format!("communities for {n} topics"))?;
        let part = &stage.partition;

        let deviance_comparison = match compare_partition_deviances(&net, &classes, part) {
            Ok(c) => Some(c),
            Err(Error::IdenticalDeviances) => {
                log::warn!("data-driven and classification partitions fit every edge identically");
                None
            }
            Err(e) => return Err(e),
        };
        let signed_consensus_jaccard = match &stage.signed_partition {
            Some(p) => Some(partition_jaccard(p, part)?),
            None => None,
        };
        let report = CommunityReport {
            manifest_hash: run.manifest_hash.clone(),
            n,
            gamma: stage.gamma,
            gamma_selected_automatically: stage.curve.is_some(),
            communities_data_driven: part.community_count(),
            communities_classification: classes.community_count(),
            modularity_data_driven: modularity(&net, part, stage.gamma, false)?,
            modularity_classification: modularity(&net, &classes, stage.gamma, false)?,
            consensus_converged: stage.converged,
            consensus_meta_iterations: stage.meta_iterations,
            disciplinarity_data_driven: disciplinarity(part, &class_labels)?,
            disciplinarity_classification: disciplinarity(&classes, &class_labels)?,
            deviance_comparison,
            signed_consensus_jaccard,
            coverage: article_coverage(&run.corpus, &builder, &net),
            composition: composition(part, &class_labels)?,
        };

        write_partition(&net, &classes, run.create(&format!("partition_classification_n{n}.csv"))?, run.manifest())?;
        write_partition(&net, part, run.create(&format!("partition_data_driven_n{n}.csv"))?, run.manifest())?;
        if let Some(curve) = &stage.curve {
            write_gamma_curve(curve, run.create(&format!("gamma_curve_n{n}.csv"))?, run.manifest())?;
        }
        let rows: Vec<Vec<String>> = report
            .composition
            .iter()
            .map(|c| {
                let mut row = vec![c.community.to_string(), c.size.to_string()];
                for k in 0..3 {
                    match c.top_classifications.get(k) {
                        Some((label, share)) => {
                            row.push(label.clone());
                            row.push(num(*share));
                        }
                        None => row.extend([String::new(), String::new()]),
                    }
                }
                row
            })
            .collect();
        run.write_csv(
            &format!("composition_n{n}.csv"),
            &["community", "size", "class_1", "share_1", "class_2", "share_2", "class_3", "share_3"],
            &rows,
        )?;
        run.write_json(&format!("communities_n{n}.json"), &report)?;
        reports.push(report);
    }
    Ok(reports)
}

// ---------------------------------------------------------------- temporal

fn temporal_for(run: &Run, n: usize) -> Result<TemporalAnalysis> {
    let config = TemporalConfig {
        n,
        spec: run.config.window_spec(),
        nulls: run.config.nulls,
        seed: stream(run.config.seed, STREAM_TEMPORAL, n),
    };
    run.cached("temporal", &config, || temporal_analysis(&run.corpus, &config))
        .context(|| format!("temporal analysis with {n} topics"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalReport {
    pub manifest_hash: String,
    pub n: usize,
    pub windows: usize,
    pub nulls: usize,
    pub trends: Vec<TrendRow>,
}

/// Window trajectories, their null-standardized versions and trend tests.
pub fn cmd_temporal(run: &Run) -> Result<Vec<TemporalReport>> {
    let mut reports = Vec::new();
    let mut trend_rows = Vec::new();
    for &n in &run.config.n {
        let analysis = temporal_for(run, n)?;
        let z: Vec<_> = Measure::ALL
            .iter()
            .map(|&m| analysis.standardized(m))
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<String>> = analysis
            .observed
            .iter()
            .enumerate()
            .map(|(w, obs)| {
                let mut row = vec![obs.center.to_string(), obs.docs.to_string(), obs.edges.to_string()];
                for m in [Measure::Swp, Measure::Deviance, Measure::Xi, Measure::Strength] {
                    row.push(num(obs.get(m)));
                }
                for m in [Measure::Swp, Measure::Deviance, Measure::Xi, Measure::Strength] {
                    let idx = Measure::ALL.iter().position(|&x| x == m).expect("measure listed");
                    row.push(num(z[idx].values[w]));
                }
                row
            })
            .collect();
        run.write_csv(
            &format!("trajectories_n{n}.csv"),
            &[
                "window_center",
                "docs",
                "edges",
                "swp",
                "deviance",
                "xi",
                "strength",
                "z_swp",
                "z_deviance",
                "z_xi",
                "z_strength",
            ],
            &rows,
        )?;
        let mut null_rows = Vec::new();
        for (k, member) in analysis.nulls.iter().enumerate() {
            for obs in member {
                null_rows.push(vec![
                    k.to_string(),
                    obs.center.to_string(),
                    num(obs.swp),
                    num(obs.deviance),
                    num(obs.xi),
                    num(obs.strength),
                ]);
            }
        }
        run.write_csv(
            &format!("null_trajectories_n{n}.csv"),
            &["member", "window_center", "swp", "deviance", "xi", "strength"],
            &null_rows,
        )?;

        let trends = analysis.trends()?;
        for t in &trends {
            let (r2_adj, p_adj) = match t.strength_adjusted {
                Some(a) => (num(a.r2), num(a.p)),
                None => (String::new(), String::new()),
            };
            trend_rows.push(vec![
                n.to_string(),
                t.measure.to_string(),
                num(t.standardized.r2),
                num(t.standardized.slope),
                num(t.standardized.p),
                num(t.raw.r2),
                num(t.raw.p),
                r2_adj,
                p_adj,
                num(t.mean_z),
            ]);
        }
        let report = TemporalReport {
            manifest_hash: run.manifest_hash.clone(),
            n,
            windows: analysis.observed.len(),
            nulls: analysis.nulls.len(),
            trends,
        };
        run.write_json(&format!("temporal_n{n}.json"), &report)?;
        reports.push(report);
    }
    run.write_csv(
        "trends.csv",
        &["n", "measure", "r2", "slope", "p", "r2_raw", "p_raw", "r2_strength_adjusted", "p_strength_adjusted", "mean_z"],
        &trend_rows,
    )?;
    Ok(reports)
}

// ---------------------------------------------------------------- score

/// Yearly `(year, impact_factor)` CSV; `#` lines are comments.
pub fn read_impact(path: &Path) -> Result<BTreeMap<i32, f64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema {
                line: 1,
                message: format!("impact file lacks a `{name}` column"),
            })
    };
    let (yc, vc) = (col("year")?, col("impact_factor")?);
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let year: i32 = rec.get(yc).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Schema {
            line,
            message: "unparseable year".into(),
        })?;
        let value: f64 = rec.get(vc).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Schema {
            line,
            message: "unparseable impact_factor".into(),
        })?;
        if out.insert(year, value).is_some() {
            return Err(Error::Schema {
                line,
                message: format!("year {year} listed twice"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialCorrelationTest {
    pub measure: Measure,
    pub r: f64,
    /// `(1 + k) / (1 + m)` with `k` null members reaching `|r|`.
    pub p_null: f64,
    pub p_parametric: f64,
    pub null_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependentComparison {
    pub first: Measure,
    pub second: Measure,
    pub r_first: f64,
    pub r_second: f64,
    pub r_between: f64,
    pub test: DependentCorrelationTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub manifest_hash: String,
    pub n: usize,
    pub windows_used: usize,
    pub first_window: Month,
    pub last_window: Month,
    /// Share of impact variance explained by the window's document count.
    pub impact_variance_explained_by_documents: f64,
    pub partial_correlations: Vec<PartialCorrelationTest>,
    pub dependent_comparisons: Vec<DependentComparison>,
    pub notes: Vec<String>,
}

/// Relate standardized trajectories to a yearly outside series.
pub fn score(analysis: &TemporalAnalysis, monthly: &[(Month, f64)], manifest_hash: &str) -> Result<ScoreReport> {
    let lookup: HashMap<Month, f64> = monthly.iter().copied().collect();
    let keep: Vec<usize> = analysis
        .observed
        .iter()
        .enumerate()
        .filter(|(_, w)| lookup.contains_key(&w.center))
        .map(|(i, _)| i)
        .collect();
    if keep.len() < 10 {
        return Err(Error::TooFewObservations {
            required: 10,
            actual: keep.len(),
        });
    }
    let pick = |v: &[f64]| -> Vec<f64> { keep.iter().map(|&i| v[i]).collect() };
    let impact: Vec<f64> = keep.iter().map(|&i| lookup[&analysis.observed[i].center]).collect();
    let docs: Vec<f64> = keep.iter().map(|&i| analysis.observed[i].docs as f64).collect();
    let explained = match pearson(&impact, &docs) {
        Ok(r) => r * r,
        Err(Error::ZeroVariance(_)) => 0.0,
        Err(e) => return Err(e),
    };
    let impact_resid = residualize(&impact, &docs)?;

    let z_strength = pick(&analysis.standardized(Measure::Strength)?.values);
    let z_strength_nulls: Vec<Vec<f64>> = analysis
        .standardized_nulls(Measure::Strength)?
        .iter()
        .map(|t| pick(&t.values))
        .collect();

    let targets = [Measure::Xi, Measure::Swp, Measure::Deviance];
    let mut partial_correlations = Vec::new();
    let mut adjusted: HashMap<Measure, Vec<f64>> = HashMap::new();
    for m in targets {
        let z = pick(&analysis.standardized(m)?.values);
        let r = partial_correlation(&z, &impact_resid, &z_strength)?;
        let null_r: Vec<f64> = analysis
            .standardized_nulls(m)?
            .iter()
            .zip(&z_strength_nulls)
            .map(|(t, s)| partial_correlation(&pick(&t.values), &impact_resid, s))
            .collect::<Result<_>>()?;
        partial_correlations.push(PartialCorrelationTest {
            measure: m,
            r,
            p_null: permutation_p(r.abs(), &null_r.iter().map(|v| v.abs()).collect::<Vec<_>>(), |null, obs| null >= obs),
            p_parametric: correlation_p_value(r, keep.len() as f64 - 3.0)?,
            null_count: null_r.len(),
        });
        adjusted.insert(m, residualize(&z, &z_strength)?);
    }

    let mut dependent_comparisons = Vec::new();
    for second in [Measure::Swp, Measure::Deviance] {
        let x = &impact_resid;
        let y = &adjusted[&Measure::Xi];
        let z = &adjusted[&second];
        let (r_first, r_second, r_between) = (pearson(x, y)?, pearson(x, z)?, pearson(y, z)?);
        dependent_comparisons.push(DependentComparison {
            first: Measure::Xi,
            second,
            r_first,
            r_second,
            r_between,
            test: compare_dependent_correlations(r_first, r_second, r_between, keep.len())?,
        });
    }

    Ok(ScoreReport {
        manifest_hash: manifest_hash.to_string(),
        n: analysis.config.n,
        windows_used: keep.len(),
        first_window: analysis.observed[keep[0]].center,
        last_window: analysis.observed[*keep.last().expect("nonempty")].center,
        impact_variance_explained_by_documents: explained,
        partial_correlations,
        dependent_comparisons,
        notes: vec![
            "impact values are natural-cubic-spline interpolations of yearly values placed at mid-year".into(),
            "impact is residualized on the window's document count before correlating".into(),
            "partial correlations control for the null-standardized mean strength".into(),
            "p_null is two-sided: null members count when |r_null| >= |r|".into(),
            "dependent comparisons use Williams' t on strength-adjusted series".into(),
        ],
    })
}

/// Partial correlations of standardized trajectories with the impact series.
pub fn cmd_score(run: &Run) -> Result<Vec<ScoreReport>> {
    let path = run
        .config
        .impact
        .clone()
        .ok_or_else(|| Error::Usage("score needs --impact <csv>".into()))?;
    let yearly = read_impact(&path)?;
    let monthly = spline_interpolate_monthly(&yearly).context(|| "impact series".to_string())?;
    run.write_csv(
        "impact_monthly.csv",
        &["month", "impact_factor"],
        &monthly.iter().map(|(m, v)| vec![m.to_string(), num(*v)]).collect::<Vec<_>>(),
    )?;
    let mut reports = Vec::new();
    for &n in &run.config.n {
        let analysis = temporal_for(run, n)?;
        let report = score(&analysis, &monthly, &run.manifest_hash).context(|| format!("score with {n} topics"))?;
        run.write_json(&format!("score_n{n}.json"), &report)?;
        reports.push(report);
    }
    Ok(reports)
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub manifest_hash: String,
    pub documents: usize,
    pub span: (Month, Month),
    pub build: Vec<BuildReport>,
    pub communities: Vec<CommunityReport>,
    pub temporal: Vec<TemporalReport>,
    pub score: Option<Vec<ScoreReport>>,
}

/// Every stage (reusing cached work) and a combined summary.
pub fn cmd_report(run: &Run) -> Result<RunReport> {
    let build = cmd_build(run)?;
    let communities = cmd_communities(run)?;
    let temporal = cmd_temporal(run)?;
    let score = match run.config.impact {
        Some(_) => Some(cmd_score(run)?),
        None => None,
    };
    let report = RunReport {
        manifest_hash: run.manifest_hash.clone(),
        documents: run.corpus.len(),
        span: run.corpus.span(),
        build,
        communities,
        temporal,
        score,
    };
    run.write_json("report.json", &report)?;
    Ok(report)
}
