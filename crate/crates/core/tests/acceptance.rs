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

//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! every line is printed; exits non-zero when a criterion fails.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use topicnet::community::{consensus_partition, modularity, partition_jaccard, Partition, PartitionOrigin};
use topicnet::corpus::Month;
use topicnet::graphbuild::{IncidenceMatrix, TopicNetwork, WindowSpec};
use topicnet::metrics::{
    betweenness, clustering_barrat, degree_strength, global_efficiency, path_length, small_world_propensity,
};
use topicnet::nulls::{derive_seed, random_reference, rng_for, NullEnsemble, RewireConfig};
use topicnet::pipeline::{self, GammaChoice, PartialConfig, Run};
use topicnet::scoring::{
    compare_partition_deviances, midranks, partial_correlation, partial_correlation_closed_form, partition_deviance,
    pearson, permutation_p, wilcoxon_signed_rank, NaturalSpline,
};
use topicnet::synthetic::{exponential_wsbm, planted_partition, ring_lattice, watts_strogatz, Ramp, SyntheticCorpusSpec};
use topicnet::temporal::{temporal_analysis, Measure, TemporalConfig};

enum Outcome {
    Pass(String),
    Fail(String),
    Skipped(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------- A1

fn pearson_binary(x: &[u8], y: &[u8]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().map(|&v| v as f64).sum::<f64>() / n;
    let my = y.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a as f64 - mx, b as f64 - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn a1() -> Outcome {
    let (docs, topics) = (200, 50);
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    let mut definedness_mismatch = 0usize;
    for rep in 0..100u64 {
        let mut rng = rng_for(derive_seed(1, rep));
        // Per-topic prevalence from 0 (constant column) to 0.6.
        let prevalence: Vec<f64> = (0..topics)
            .map(|t| if t % 17 == 0 { 0.0 } else { rng.random_range(0.01..0.6) })
            .collect();
        let rows: Vec<Vec<u8>> = (0..docs)
            .map(|_| prevalence.iter().map(|&p| rng.random_bool(p) as u8).collect())
            .collect();
        let m = IncidenceMatrix::from_dense(&rows).expect("valid incidence");
        let phi = m.phi_matrix();
        let cols: Vec<Vec<u8>> = (0..topics).map(|t| m.column(t)).collect();
        for i in 0..topics {
            for j in 0..topics {
                if i == j {
                    continue;
                }
                match pearson_binary(&cols[i], &cols[j]) {
                    Some(r) => {
                        worst = worst.max((phi[i * topics + j] - r).abs());
                        compared += 1;
                    }
                    None => definedness_mismatch += phi[i * topics + j].is_finite() as usize,
                }
            }
        }
    }
    verdict(
        worst <= 1e-12 && definedness_mismatch == 0,
        format!("{compared} defined entries, max |phi - pearson| = {worst:.2e}, undefined-but-finite = {definedness_mismatch}"),
    )
}

// ---------------------------------------------------------------- A2

/// Every simple path from `s` to `t` as (length, interior nodes).
fn simple_paths(w: &[f64], n: usize, s: usize, t: usize) -> Vec<(f64, Vec<usize>)> {
    fn walk(w: &[f64], n: usize, v: usize, t: usize, len: f64, path: &mut Vec<usize>, seen: &mut [bool], out: &mut Vec<(f64, Vec<usize>)>) {
        if v == t {
            out.push((len, path[1..path.len() - 1].to_vec()));
            return;
        }
        for u in 0..n {
            if !seen[u] && w[v * n + u] > 0.0 {
                seen[u] = true;
                path.push(u);
                walk(w, n, u, t, len + 1.0 / w[v * n + u], path, seen, out);
                path.pop();
                seen[u] = false;
            }
        }
    }
    let mut out = Vec::new();
    let mut seen = vec![false; n];
    seen[s] = true;
    walk(w, n, s, t, 0.0, &mut vec![s], &mut seen, &mut out);
    out
}

struct BruteMetrics {
    degree: Vec<usize>,
    strength: Vec<f64>,
    betweenness: Vec<f64>,
    clustering: Vec<f64>,
    efficiency: f64,
    path_length: f64,
    disconnected: bool,
}

fn brute_metrics(w: &[f64], n: usize) -> BruteMetrics {
    let degree: Vec<usize> = (0..n).map(|i| (0..n).filter(|&j| w[i * n + j] > 0.0).count()).collect();
    let strength: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w[i * n + j]).sum()).collect();
    let mut between = vec![0.0; n];
    let (mut eff, mut len_sum, mut reachable) = (0.0, 0.0, 0usize);
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let paths = simple_paths(w, n, s, t);
            let Some(best) = paths.iter().map(|p| p.0).min_by(f64::total_cmp) else {
                continue;
            };
            eff += 1.0 / best;
            len_sum += best;
            reachable += 1;
            let shortest: Vec<&Vec<usize>> = paths
                .iter()
                .filter(|p| (p.0 - best).abs() <= 1e-12 * best)
                .map(|p| &p.1)
                .collect();
            for v in 0..n {
                let through = shortest.iter().filter(|inner| inner.contains(&v)).count();
                between[v] += through as f64 / shortest.len() as f64;
            }
        }
    }
    let pairs = (n * (n - 1)) as f64;
    let clustering = (0..n)
        .map(|i| {
            if degree[i] < 2 {
                return 0.0;
            }
            let mut sum = 0.0;
            for j in 0..n {
                for h in 0..n {
                    if j != h && w[i * n + j] > 0.0 && w[i * n + h] > 0.0 && w[j * n + h] > 0.0 {
                        sum += (w[i * n + j] + w[i * n + h]) / 2.0;
                    }
                }
            }
            sum / (strength[i] * (degree[i] - 1) as f64)
        })
        .collect();
    BruteMetrics {
        degree,
        strength,
        betweenness: between.iter().map(|b| b / ((n - 1) * (n - 2)) as f64).collect(),
        clustering,
        efficiency: eff / pairs,
        path_length: len_sum / reachable as f64,
        disconnected: reachable < n * (n - 1),
    }
}

fn fixture_graphs() -> Vec<TopicNetwork> {
    let mut out = Vec::new();
    // Dyadic weights make equal-length shortest paths common.
    let dyadic = [0.25, 0.5, 1.0, 2.0];
    for rep in 0..40u64 {
        let mut rng = rng_for(derive_seed(2, rep));
        let n = rng.random_range(4..=9);
        let density = rng.random_range(0.3..0.9);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(density) {
                    let w = if rep % 2 == 0 {
                        dyadic[rng.random_range(0..dyadic.len())]
                    } else {
                        rng.random_range(0.05..1.0)
                    };
                    edges.push((i, j, w));
                }
            }
        }
        if !edges.is_empty() {
            out.push(TopicNetwork::from_edges(n, &edges).unwrap());
        }
    }
    // Sparse 10-12 node graphs: rings with chords, one with an isolated pair.
    for (n, chords) in [(10usize, 3usize), (11, 4), (12, 2), (12, 5)] {
        let mut rng = rng_for(derive_seed(3, n as u64 * 10 + chords as u64));
        let mut edges: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, rng.random_range(0.1..1.0))).collect();
        for _ in 0..chords {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            if a != b && !edges.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)) {
                edges.push((a, b, 1.0));
            }
        }
        out.push(TopicNetwork::from_edges(n, &edges).unwrap());
    }
    out.push(TopicNetwork::from_edges(12, &[(0, 1, 1.0), (1, 2, 0.5), (2, 0, 0.5), (3, 4, 1.0), (5, 6, 2.0), (6, 7, 2.0), (7, 8, 1.0), (8, 9, 0.5), (9, 10, 0.25), (10, 11, 1.0)]).unwrap());
    out
}

fn a2() -> Outcome {
    let tol = 1e-12;
    let graphs = fixture_graphs();
    let mut failures = Vec::new();
    for (g, net) in graphs.iter().enumerate() {
        let n = net.node_count();
        let brute = brute_metrics(net.weights(), n);
        let (k, s) = degree_strength(net);
        let b = betweenness(net).unwrap();
        let c = clustering_barrat(net);
        let e = global_efficiency(net).unwrap();
        let l = path_length(net).unwrap();
        let vec_ok = |a: &[f64], z: &[f64]| a.iter().zip(z).all(|(x, y)| close(*x, *y, tol));
        let checks = [
            ("degree", k == brute.degree),
            ("strength", vec_ok(&s, &brute.strength)),
            ("betweenness", vec_ok(&b, &brute.betweenness)),
            ("clustering", vec_ok(&c.local, &brute.clustering)),
            ("efficiency", close(e, brute.efficiency, tol)),
            ("path length", close(l.value, brute.path_length, tol) && l.disconnected == brute.disconnected),
        ];
        for (name, ok) in checks {
            if !ok {
                failures.push(format!("graph {g} ({n} nodes): {name}"));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!("{} fixture graphs of 4-12 nodes; mismatches: {:?}", graphs.len(), failures),
    )
}

// ---------------------------------------------------------------- A3

fn a3() -> Outcome {
    let mut ordered = 0;
    let mut out_of_range = 0;
    let seeds = 50u64;
    for seed in 0..seeds {
        let ws = watts_strogatz(100, 10, 0.1, seed).unwrap();
        let ring = ring_lattice(100, 10).unwrap();
        let random = random_reference(&ws, derive_seed(seed, 99)).unwrap();
        let phi = |net: &TopicNetwork| small_world_propensity(net, derive_seed(seed, 7)).unwrap().phi;
        let (p_ws, p_ring, p_rand) = (phi(&ws), phi(&ring), phi(&random));
        out_of_range += [p_ws, p_ring, p_rand].iter().filter(|p| !(0.0..=1.0).contains(*p)).count();
        if p_ws > p_ring && p_ws > p_rand {
            ordered += 1;
        }
    }
    verdict(
        ordered * 100 >= 95 * seeds as usize && out_of_range == 0,
        format!("Watts-Strogatz above both references in {ordered}/{seeds} seeds; {out_of_range} values outside [0,1]"),
    )
}

// ---------------------------------------------------------------- A4

fn a4() -> Outcome {
    let graphs = 20u64;
    let (mut recovered, mut q_ok) = (0, 0);
    let mut min_jaccard = f64::INFINITY;
    let mut min_q_gap = f64::INFINITY;
    for g in 0..graphs {
        let (net, truth) = planted_partition(64, 4, 0.4, 0.02, derive_seed(4, g)).unwrap();
        let cons = consensus_partition(&net, 1.0, 100, derive_seed(40, g)).unwrap();
        let j = partition_jaccard(&cons.partition, &truth).unwrap();
        let gap = modularity(&net, &cons.partition, 1.0, false).unwrap() - modularity(&net, &truth, 1.0, false).unwrap();
        min_jaccard = min_jaccard.min(j);
        min_q_gap = min_q_gap.min(gap);
        recovered += (j >= 0.9) as usize;
        q_ok += (gap >= -1e-9) as usize;
    }
    verdict(
        recovered == graphs as usize && q_ok == graphs as usize,
        format!("Jaccard >= 0.9 in {recovered}/{graphs} (min {min_jaccard:.3}); Q(consensus) >= Q(planted) in {q_ok}/{graphs} (min gap {min_q_gap:.2e})"),
    )
}

// ---------------------------------------------------------------- A5

fn a5() -> Outcome {
    let means = [5.0, 1.0, 1.0, 1.0, 5.0, 1.0, 1.0, 1.0, 5.0];
    let graphs = 100u64;
    let (mut lower, mut significant) = (0, 0);
    for g in 0..graphs {
        let (net, truth) = exponential_wsbm(60, &means, 0.5, derive_seed(5, g)).unwrap();
        let mut labels = truth.labels().to_vec();
        labels.shuffle(&mut rng_for(derive_seed(50, g)));
        let random = Partition::new(&labels, None, PartitionOrigin::Planted);
        let (d_true, _) = partition_deviance(&net, &truth).unwrap();
        let (d_rand, _) = partition_deviance(&net, &random).unwrap();
        lower += (d_true < d_rand) as usize;
        let cmp = compare_partition_deviances(&net, &random, &truth).unwrap();
        significant += (cmp.wilcoxon.p_greater < 0.05) as usize;
    }
    verdict(
        lower >= 95 && significant >= 90,
        format!("D(true) < D(relabelled) in {lower}/{graphs}; signed-rank p < 0.05 in {significant}/{graphs}"),
    )
}

// ---------------------------------------------------------------- A6

fn a6() -> Outcome {
    let means = [1.0, 0.3, 0.3, 1.5];
    let (net, _) = exponential_wsbm(200, &means, 0.08, 6).unwrap();
    let ensemble = NullEnsemble::rewired(&net, 66, 100, &RewireConfig::default()).unwrap();
    let (k0, s0) = degree_strength(&net);
    let mut degree_exact = 0;
    let mut worst = 0.0f64;
    for null in &ensemble.members {
        let (k, s) = degree_strength(null);
        degree_exact += (k == k0) as usize;
        for (a, b) in s.iter().zip(&s0) {
            if *b > 0.0 {
                worst = worst.max((a - b).abs() / b);
            }
        }
    }
    verdict(
        degree_exact == 100 && worst <= 0.05 && ensemble.members_distinct(),
        format!("{} edges; degree sequence exact in {degree_exact}/100; max relative strength error {worst:.4}", net.edge_count()),
    )
}

// ---------------------------------------------------------------- A7, A8

const TEMPORAL_NULLS: usize = 20;

fn month(y: i32, m: u32) -> Month {
    Month::new(y, m).unwrap()
}

fn a7() -> Outcome {
    let runs = 20u64;
    let spec = SyntheticCorpusSpec::stationary(month(2000, 1), month(2009, 12));
    let mut per_measure: BTreeMap<&str, usize> = BTreeMap::new();
    let mut detail = String::new();
    for run in 0..runs {
        let corpus = spec.generate(derive_seed(7, run)).unwrap();
        let config = TemporalConfig {
            n: 20,
            spec: WindowSpec::default(),
            nulls: TEMPORAL_NULLS,
            seed: derive_seed(70, run),
        };
        let analysis = temporal_analysis(&corpus, &config).unwrap();
        for row in analysis.trends().unwrap() {
            let ok = row.mean_z.abs() <= 0.5 && row.standardized.p > 0.05;
            *per_measure.entry(row.measure.label()).or_default() += ok as usize;
        }
    }
    let mut all = true;
    for (m, ok) in &per_measure {
        all &= *ok * 10 >= 9 * runs as usize;
        let _ = write!(detail, "{m} {ok}/{runs}; ");
    }
    verdict(all, format!("stable in: {detail}(|mean z| <= 0.5 and trend p > 0.05, {TEMPORAL_NULLS} nulls, 108 windows)"))
}

fn a8() -> Outcome {
    let runs = 20u64;
    let first = month(2000, 1);
    let last = month(2004, 12);
    let mut strengthening = SyntheticCorpusSpec::stationary(first, last);
    strengthening.p_in = Ramp { start: 0.15, end: 0.45 };
    let mut mixing = SyntheticCorpusSpec::stationary(first, last);
    mixing.theme = Ramp { start: 0.0, end: 0.5 };
    let (mut detected, mut positive) = (0, 0);
    for run in 0..runs {
        let config = TemporalConfig {
            n: 20,
            spec: WindowSpec::default(),
            nulls: TEMPORAL_NULLS,
            seed: derive_seed(80, run),
        };
        let a = temporal_analysis(&strengthening.generate(derive_seed(8, run)).unwrap(), &config).unwrap();
        let trends = a.trends().unwrap();
        let strength = trends.iter().find(|t| t.measure == Measure::Strength).unwrap();
        detected += (strength.standardized.p < 0.05) as usize;

        let b = temporal_analysis(&mixing.generate(derive_seed(81, run)).unwrap(), &config).unwrap();
        let trends = b.trends().unwrap();
        let xi = trends.iter().find(|t| t.measure == Measure::Xi).unwrap();
        positive += (xi.standardized.slope > 0.0) as usize;
    }
    verdict(
        detected * 10 >= 9 * runs as usize && positive * 10 >= 9 * runs as usize,
        format!("strength trend p < 0.05 in {detected}/{runs}; xi trend positive in {positive}/{runs} (48 windows, {TEMPORAL_NULLS} nulls)"),
    )
}

// ---------------------------------------------------------------- A9

fn enumerate_wilcoxon(diffs: &[f64]) -> (f64, f64) {
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, _) = midranks(&abs);
    let obs: f64 = ranks.iter().zip(diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let n = diffs.len();
    let (mut ge, mut le) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        ge += (w >= obs - 1e-9) as u64;
        le += (w <= obs + 1e-9) as u64;
    }
    let all = (1u64 << n) as f64;
    (ge as f64 / all, le as f64 / all)
}

fn a9() -> Outcome {
    let mut rng = rng_for(9);
    let mut problems = Vec::new();

    let mut worst_w = 0.0f64;
    for rep in 0..300 {
        let n = 5 + rep % 6;
        // Rounded values give tied magnitudes.
        let x: Vec<f64> = (0..n).map(|_| (rng.random_range(-3.0f64..3.0) * 2.0).round() / 2.0).collect();
        let x: Vec<f64> = x.into_iter().map(|v| if v == 0.0 { 0.5 } else { v }).collect();
        let zeros = vec![0.0; n];
        let res = wilcoxon_signed_rank(&x, &zeros).unwrap();
        let (ge, le) = enumerate_wilcoxon(&x);
        worst_w = worst_w.max((res.p_greater - ge).abs()).max((res.p_less - le).abs());
    }
    if worst_w > 1e-12 {
        problems.push(format!("wilcoxon max error {worst_w:.2e}"));
    }

    let mut worst_pc = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(8..60);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = z.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = z.iter().zip(&x).map(|(a, b)| a - 0.5 * b + rng.random_range(-1.0..1.0)).collect();
        let resid = partial_correlation(&x, &y, &z).unwrap();
        let closed =
            partial_correlation_closed_form(pearson(&x, &y).unwrap(), pearson(&x, &z).unwrap(), pearson(&y, &z).unwrap()).unwrap();
        worst_pc = worst_pc.max((resid - closed).abs());
    }
    if worst_pc > 1e-10 {
        problems.push(format!("partial correlation max gap {worst_pc:.2e}"));
    }

    let xs: Vec<f64> = (0..8).map(|i| i as f64 * 12.0 + rng.random_range(-2.0..2.0)).collect();
    let ys: Vec<f64> = (0..8).map(|_| rng.random_range(-5.0..5.0)).collect();
    let spline = NaturalSpline::new(&xs, &ys).unwrap();
    let knot_err = xs.iter().zip(&ys).map(|(x, y)| (spline.eval(*x) - y).abs()).fold(0.0, f64::max);
    let lin: Vec<f64> = xs.iter().map(|x| 3.0 - 0.25 * x).collect();
    let line = NaturalSpline::new(&xs, &lin).unwrap();
    let lin_err = (-20..120)
        .map(|t| t as f64)
        .map(|t| (line.eval(t) - (3.0 - 0.25 * t)).abs())
        .fold(0.0, f64::max);
    if knot_err > 1e-12 || lin_err > 1e-12 {
        problems.push(format!("spline knot error {knot_err:.2e}, linear error {lin_err:.2e}"));
    }

    // Exchangeable observed and null draws give a discrete-uniform p.
    let (reps, m) = (4000usize, 19usize);
    let mut hist = vec![0usize; m + 1];
    for _ in 0..reps {
        let obs: f64 = rng.random();
        let nulls: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let p = permutation_p(obs, &nulls, |null, o| null >= o);
        hist[((p * (m + 1) as f64).round() as usize) - 1] += 1;
    }
    let expected = reps as f64 / (m + 1) as f64;
    let chi2: f64 = hist.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9th percentile of chi-square with 19 degrees of freedom.
    if chi2 > 43.82 {
        problems.push(format!("permutation p not uniform (chi2 = {chi2:.1})"));
    }
    verdict(
        problems.is_empty(),
        format!("wilcoxon err {worst_w:.1e}, partial r gap {worst_pc:.1e}, spline err {knot_err:.1e}/{lin_err:.1e}, uniformity chi2 {chi2:.1} (19 df)"),
    )
}

// ---------------------------------------------------------------- A10

fn a10() -> Outcome {
    let Ok(input) = std::env::var("TOPICNET_REFERENCE_CORPUS") else {
        return Outcome::Skipped("set TOPICNET_REFERENCE_CORPUS (and TOPICNET_REFERENCE_IMPACT) to run".into());
    };
    let out = tempfile::tempdir().unwrap();
    let cfg = PartialConfig {
        input: Some(input.into()),
        n: Some(vec![1000]),
        gamma: Some(GammaChoice::Fixed(1.2)),
        seed: Some(2019),
        out: Some(out.path().to_path_buf()),
        impact: std::env::var("TOPICNET_REFERENCE_IMPACT").ok().map(PathBuf::from),
        ..Default::default()
    }
    .resolve()
    .unwrap();
    let run = Run::load(cfg).unwrap();
    let report = pipeline::cmd_report(&run).unwrap();
    let swp = report.build[0].small_world.phi;
    let c = &report.communities[0];
    let windows = report.temporal[0].windows;
    let mut checks = vec![
        ("small-world propensity 0.57", (swp - 0.57).abs() <= 0.02),
        ("Q data-driven 0.37", (c.modularity_data_driven - 0.37).abs() <= 0.02),
        ("Q classification 0.25", (c.modularity_classification - 0.25).abs() <= 0.02),
        ("8 communities", c.communities_data_driven.abs_diff(8) <= 1),
        ("disciplinarity 0.48", (c.disciplinarity_data_driven - 0.48).abs() <= 0.03),
        ("203 windows", windows == 203),
    ];
    let mut r_xi = f64::NAN;
    if let Some(score) = &report.score {
        r_xi = score[0].partial_correlations.iter().find(|t| t.measure == Measure::Xi).unwrap().r;
        checks.push(("xi-impact partial r 0.45", (r_xi - 0.45).abs() <= 0.05));
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        failed.is_empty(),
        format!(
            "swp {swp:.3}, Q {:.3} vs {:.3}, {} communities, disciplinarity {:.3}, {windows} windows, r_xi {r_xi:.3}; off target: {failed:?}",
            c.modularity_data_driven, c.modularity_classification, c.communities_data_driven, c.disciplinarity_data_driven
        ),
    )
}

// ---------------------------------------------------------------- A11

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn a11() -> Outcome {
    let work = tempfile::tempdir().unwrap();
    let corpus = SyntheticCorpusSpec {
        docs_per_month: 12,
        theme: Ramp { start: 0.0, end: 0.3 },
        ..SyntheticCorpusSpec::stationary(month(2000, 1), month(2001, 12))
    }
    .generate(11)
    .unwrap();
    let corpus_path = work.path().join("corpus.jsonl");
    let mut lines = String::new();
    for d in corpus.documents() {
        lines.push_str(&serde_json::to_string(d).unwrap());
        lines.push('\n');
    }
    std::fs::write(&corpus_path, lines).unwrap();
    let impact_path = work.path().join("impact.csv");
    std::fs::write(&impact_path, "year,impact_factor\n1999,9.1\n2000,9.4\n2001,9.3\n2002,9.8\n").unwrap();

    let bin = env!("CARGO_BIN_EXE_topicnet");
    let mut mismatched = Vec::new();
    let subcommands = ["build", "nulls", "communities", "temporal", "score", "report"];
    for sub in subcommands {
        let mut snaps = Vec::new();
        for threads in ["1", "3"] {
            let out = work.path().join(format!("{sub}-{threads}"));
            let status = Command::new(bin)
                .args([sub, "--input"])
                .arg(&corpus_path)
                .args(["--n", "12", "--n", "16", "--seed", "5", "--nulls", "6", "--runs", "4"])
                .args(["--gamma", "auto", "--gamma-repeats", "2", "--gamma-runs", "2", "--threads", threads])
                .arg("--impact")
                .arg(&impact_path)
                .arg("--out")
                .arg(&out)
                .stdout(std::process::Stdio::null())
                .status()
                .unwrap();
            if !status.success() {
                return Outcome::Fail(format!("`{sub}` exited with {status}"));
            }
            snaps.push(snapshot(&out));
        }
        if snaps[0] != snaps[1] || snaps[0].is_empty() {
            mismatched.push(sub);
        }
    }
    verdict(
        mismatched.is_empty(),
        format!("{} subcommands compared under 1 and 3 workers; differing: {mismatched:?}", subcommands.len()),
    )
}

fn main() {
    let criteria: [(&str, &str, Duration, fn() -> Outcome); 11] = [
        ("A1", "phi matches Pearson on binary columns", Duration::from_secs(10), a1),
        ("A2", "metrics match brute-force enumeration", Duration::from_secs(30), a2),
        ("A3", "small-world propensity ordering", Duration::from_secs(120), a3),
        ("A4", "planted community recovery", Duration::from_secs(120), a4),
        ("A5", "deviance discriminates partitions", Duration::from_secs(180), a5),
        ("A6", "rewired nulls preserve degree and strength", Duration::from_secs(60), a6),
        ("A7", "temporal null is calibrated on a stationary corpus", Duration::from_secs(600), a7),
        ("A8", "planted trends are detected", Duration::from_secs(600), a8),
        ("A9", "statistics oracles", Duration::from_secs(60), a9),
        ("A10", "reference corpus figures", Duration::from_secs(u64::MAX / 4), a10),
        ("A11", "byte-identical reruns across worker counts", Duration::from_secs(60), a11),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o.eq_ignore_ascii_case(id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Outcome::Pass(d) if elapsed <= budget => ("PASS", d),
            Outcome::Pass(d) => ("FAIL", format!("{d}; over the {}s budget", budget.as_secs())),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skipped(d) => ("SKIPPED", d),
        };
        failed += (status == "FAIL") as usize;
        println!("{status} {id} {name} [{:.1}s]: {detail}", elapsed.as_secs_f64());
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
