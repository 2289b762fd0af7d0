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

//! Block-model deviance, disciplinarity, interdisciplinarity and the
//! statistics used to relate them to time and to outside series.

mod spline;
mod stats;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use spline::{spline_interpolate_monthly, NaturalSpline, KNOT_MONTH};
pub use stats::{
    compare_dependent_correlations, correlation_p_value, linear_fit, mean, midranks, partial_correlation, partial_correlation_closed_form,
    pearson, permutation_p, r_squared_on_index, residualize, wilcoxon_signed_rank, DependentCorrelationTest,
    WilcoxonMethod, WilcoxonResult, WILCOXON_EXACT_MAX,
};

use crate::community::Partition;
use crate::corpus::Month;
use crate::error::{Error, Result};
use crate::graphbuild::TopicNetwork;
use crate::metrics::small_world_propensity;

/// A scalar measure over consecutive windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureTrajectory {
    pub label: String,
    pub centers: Vec<Month>,
    pub values: Vec<f64>,
    pub standardized: bool,
}

impl MeasureTrajectory {
    pub fn new(label: impl Into<String>, centers: Vec<Month>, values: Vec<f64>) -> Result<Self> {
        if centers.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: centers.len(),
                right: values.len(),
            });
        }
        if centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("window centers must be strictly increasing".into()));
        }
        let label = label.into();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite `{label}` value at {}",
                centers[i]
            )));
        }
        Ok(MeasureTrajectory {
            label,
            centers,
            values,
            standardized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_cover(net: &TopicNetwork, part: &Partition) -> Result<()> {
    if part.len() != net.node_count() {
        return Err(Error::NodeSetMismatch {
            partition: part.len(),
            network: net.node_count(),
        });
    }
    Ok(())
}

/// Exponential block fit: the rate of block `(p, b)` is the reciprocal of
/// its mean positive edge weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFit {
    pub partition: Partition,
    /// Row-major `K×K` mean positive weight per block; 0 for empty blocks.
    pub block_means: Vec<f64>,
    pub block_edges: Vec<usize>,
    /// Sum over ordered pairs with positive weight.
    pub deviance_total: f64,
    /// Mean squared deviation per edge.
    pub deviance_per_edge: f64,
    /// Squared deviation of each undirected edge, in [`TopicNetwork::edges`] order.
    pub edge_deviances: Vec<f64>,
}

impl BlockFit {
    pub fn communities(&self) -> usize {
        self.partition.community_count()
    }

    pub fn block_mean(&self, p: usize, b: usize) -> f64 {
        self.block_means[(p - 1) * self.communities() + (b - 1)]
    }

    /// Exponential rate `1/β̂`, or `None` for an empty block.
    pub fn rate(&self, p: usize, b: usize) -> Option<f64> {
        let m = self.block_mean(p, b);
        (m > 0.0).then(|| 1.0 / m)
    }
}

/// Block means of positive edge weights under `part`.
pub fn block_expected_weights(net: &TopicNetwork, part: &Partition) -> Result<BlockFit> {
    check_cover(net, part)?;
    let k = part.community_count();
    let mut sums = vec![0.0; k * k];
    let mut counts = vec![0usize; k * k];
    let edges = net.edges();
    for &(i, j, w) in &edges {
        let (p, b) = (part.label(i) - 1, part.label(j) - 1);
        for cell in [p * k + b, b * k + p] {
            sums[cell] += w;
            counts[cell] += 1;
        }
        if p == b {
            // diagonal block counted twice above
            sums[p * k + p] -= w;
            counts[p * k + p] -= 1;
        }
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let edge_deviances: Vec<f64> = edges
        .iter()
        .map(|&(i, j, w)| {
            let beta = means[(part.label(i) - 1) * k + (part.label(j) - 1)];
            (w - beta) * (w - beta)
        })
        .collect();
    let half: f64 = edge_deviances.iter().sum();
    let deviance_per_edge = if edge_deviances.is_empty() {
        0.0
    } else {
        half / edge_deviances.len() as f64
    };
    Ok(BlockFit {
        partition: part.clone(),
        block_means: means,
        block_edges: counts,
        deviance_total: 2.0 * half,
        deviance_per_edge,
        edge_deviances,
    })
}

/// `D = Σ_{i≠j, w_ij>0} (w_ij − β̂_{m_i m_j})²` and the squared deviation of
/// each undirected edge.
pub fn partition_deviance(net: &TopicNetwork, part: &Partition) -> Result<(f64, Vec<f64>)> {
    let fit = block_expected_weights(net, part)?;
    Ok((fit.deviance_total, fit.edge_deviances))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevianceComparison {
    pub test: String,
    pub deviance_first: f64,
    pub deviance_second: f64,
    pub wilcoxon: WilcoxonResult,
    pub note: String,
}

/// Paired signed-rank test of per-edge squared deviations under `p1`
/// against `p2`. `p_greater` is the one-sided evidence that `p1` fits
/// worse.
pub fn compare_partition_deviances(net: &TopicNetwork, p1: &Partition, p2: &Partition) -> Result<DevianceComparison> {
    let f1 = block_expected_weights(net, p1)?;
    let f2 = block_expected_weights(net, p2)?;
    let wilcoxon = wilcoxon_signed_rank(&f1.edge_deviances, &f2.edge_deviances)?;
    Ok(DevianceComparison {
        test: "wilcoxon-signed-rank".into(),
        deviance_first: f1.deviance_total,
        deviance_second: f2.deviance_total,
        wilcoxon,
        note: "paired signed-rank test over per-edge squared deviations; \
               a rank-sum test would ignore the pairing by edge"
            .into(),
    })
}

/// Mean over communities of the share held by the community's most common
/// classification.
pub fn disciplinarity<S: AsRef<str>>(part: &Partition, classes: &[S]) -> Result<f64> {
    if part.len() != classes.len() {
        return Err(Error::NodeSetMismatch {
            partition: part.len(),
            network: classes.len(),
        });
    }
    let communities = part.communities();
    if communities.is_empty() {
        return Err(Error::InvalidParameter("empty partition".into()));
    }
    let mut total = 0.0;
    for members in &communities {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for &m in members {
            *counts.entry(classes[m].as_ref()).or_insert(0) += 1;
        }
        let top = counts.values().copied().max().unwrap_or(0);
        total += top as f64 / members.len() as f64;
    }
    Ok(total / communities.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterdisciplinarityScore {
    pub xi: f64,
    pub swp: f64,
    pub classification_deviance: f64,
}

impl InterdisciplinarityScore {
    pub fn from_parts(swp: f64, classification_deviance: f64) -> Self {
        InterdisciplinarityScore {
            xi: swp * classification_deviance,
            swp,
            classification_deviance,
        }
    }
}

/// `ξ = φ · D_c` with `D_c` the mean per-edge deviance under the
/// classification partition.
pub fn interdisciplinarity(net: &TopicNetwork, classification: &Partition, seed: u64) -> Result<InterdisciplinarityScore> {
    let fit = block_expected_weights(net, classification)?;
    let swp = small_world_propensity(net, seed)?;
    Ok(InterdisciplinarityScore::from_parts(swp.phi, fit.deviance_per_edge))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendResult {
    pub r2: f64,
    /// Change per window.
    pub slope: f64,
    pub p: f64,
    pub null_count: usize,
}

/// Linear trend of a trajectory on window index, with a permutation p-value
/// against the R² of the null trajectories.
pub fn trend_r2(traj: &MeasureTrajectory, nulls: &[MeasureTrajectory]) -> Result<TrendResult> {
    if traj.len() < 3 {
        return Err(Error::TooFewObservations {
            required: 3,
            actual: traj.len(),
        });
    }
    if nulls.len() < 2 {
        return Err(Error::TooFewObservations {
            required: 2,
            actual: nulls.len(),
        });
    }
    let r2 = r_squared_on_index(&traj.values)?;
    let idx: Vec<f64> = (0..traj.len()).map(|i| i as f64).collect();
    let (_, slope) = linear_fit(&traj.values, &idx)?;
    let null_r2: Vec<f64> = nulls.iter().map(|t| r_squared_on_index(&t.values)).collect::<Result<_>>()?;
    Ok(TrendResult {
        r2,
        slope,
        p: permutation_p(r2, &null_r2, |null, obs| null >= obs),
        null_count: nulls.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::PartitionOrigin;
    use crate::nulls::rng_for;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_distr::{Distribution, Exp};

    fn part(labels: &[usize]) -> Partition {
        Partition::new(labels, None, PartitionOrigin::Planted)
    }

    #[test]
    fn block_mean_examples() {
        let net = TopicNetwork::from_edges(3, &[(0, 1, 1.0), (1, 2, 3.0)]).unwrap();
        let fit = block_expected_weights(&net, &part(&[0, 0, 0])).unwrap();
        assert_eq!(fit.block_means, vec![2.0]);
        let (d, per_edge) = partition_deviance(&net, &part(&[0, 0, 0])).unwrap();
        assert_eq!(d, 4.0);
        assert_eq!(per_edge, vec![1.0, 1.0]);
        assert_eq!(fit.deviance_per_edge, 1.0);

        let single = TopicNetwork::from_edges(3, &[(0, 1, 0.7)]).unwrap();
        let fit = block_expected_weights(&single, &part(&[0, 1, 1])).unwrap();
        assert_eq!(fit.block_mean(1, 2), 0.7);
        assert_eq!(fit.block_mean(2, 1), 0.7);
        assert_eq!(fit.block_mean(1, 1), 0.0);
        assert_eq!(fit.rate(1, 1), None);
        assert!((fit.rate(1, 2).unwrap() - 1.0 / 0.7).abs() < 1e-15);
        assert_eq!(fit.deviance_total, 0.0);
    }

    #[test]
    fn one_block_deviance_is_sum_around_global_mean() {
        let mut rng = rng_for(5);
        let mut e = Vec::new();
        for i in 0..12 {
            for j in (i + 1)..12 {
                if rng.random_bool(0.5) {
                    e.push((i, j, rng.random_range(0.1..1.0)));
                }
            }
        }
        let net = TopicNetwork::from_edges(12, &e).unwrap();
        let (d, _) = partition_deviance(&net, &part(&[0; 12])).unwrap();
        let n = net.node_count();
        let positive: Vec<f64> = net.weights().iter().copied().filter(|&w| w > 0.0).collect();
        let m = positive.iter().sum::<f64>() / positive.len() as f64;
        let mut direct = 0.0;
        for i in 0..n {
            for j in 0..n {
                let w = net.weight(i, j);
                if i != j && w > 0.0 {
                    direct += (w - m) * (w - m);
                }
            }
        }
        assert!((d - direct).abs() < 1e-12);
    }

    fn wsbm(n: usize, means: &[f64], k: usize, density: f64, seed: u64) -> (TopicNetwork, Vec<usize>) {
        let mut rng = rng_for(seed);
        let truth: Vec<usize> = (0..n).map(|i| i * k / n).collect();
        let mut e = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(density) {
                    let beta = means[truth[i] * k + truth[j]];
                    let w = Exp::new(1.0 / beta).unwrap().sample(&mut rng);
                    e.push((i, j, w.max(1e-9)));
                }
            }
        }
        (TopicNetwork::from_edges(n, &e).unwrap(), truth)
    }

    #[test]
    fn true_partition_fits_better_than_shuffles() {
        let means = [1.0, 0.1, 0.1, 0.1, 1.0, 0.1, 0.1, 0.1, 1.0];
        let mut wins = 0;
        for seed in 0..100 {
            let (net, truth) = wsbm(45, &means, 3, 0.3, seed);
            let mut shuffled = truth.clone();
            shuffled.shuffle(&mut rng_for(seed + 10_000));
            let (dt, _) = partition_deviance(&net, &part(&truth)).unwrap();
            let (ds, _) = partition_deviance(&net, &part(&shuffled)).unwrap();
            if dt < ds {
                wins += 1;
            }
        }
        assert!(wins >= 95, "{wins}");
    }

    #[test]
    fn deviance_comparison_examples() {
        let (net, truth) = wsbm(30, &[1.0, 0.1, 0.1, 1.0], 2, 0.4, 1);
        let p = part(&truth);
        assert!(matches!(compare_partition_deviances(&net, &p, &p), Err(Error::IdenticalDeviances)));
        let mut shuffled = truth.clone();
        shuffled.shuffle(&mut rng_for(2));
        let c = compare_partition_deviances(&net, &part(&shuffled), &p).unwrap();
        assert!(c.deviance_first > c.deviance_second);
        assert!(c.wilcoxon.p_greater < 0.05);
    }

    #[test]
    fn disciplinarity_examples() {
        let classes = ["a", "a", "b", "b"];
        assert_eq!(disciplinarity(&Partition::from_classifications(&classes), &classes).unwrap(), 1.0);
        assert_eq!(disciplinarity(&part(&[0, 1, 0, 1]), &classes).unwrap(), 0.5);
        assert!((disciplinarity(&part(&[0, 0, 0, 1]), &classes).unwrap() - (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn xi_is_a_product() {
        assert_eq!(InterdisciplinarityScore::from_parts(0.0, 7.0).xi, 0.0);
        assert_eq!(InterdisciplinarityScore::from_parts(0.5, 2.0).xi, 1.0);
        let a = InterdisciplinarityScore::from_parts(0.37, 0.81);
        let b = InterdisciplinarityScore::from_parts(0.37, 1.62);
        assert_eq!(b.xi, 2.0 * a.xi);
    }

    fn months(n: usize) -> Vec<Month> {
        (0..n).map(|k| Month::new(2000, 1).unwrap().offset(k as i64)).collect()
    }

    #[test]
    fn trend_examples() {
        let line = MeasureTrajectory::new("m", months(10), (0..10).map(|i| i as f64).collect()).unwrap();
        let flat = MeasureTrajectory::new("m", months(10), vec![1.0; 10]).unwrap();
        let mut rng = rng_for(3);
        let nulls: Vec<MeasureTrajectory> = (0..100)
            .map(|_| MeasureTrajectory::new("m", months(10), (0..10).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap())
            .collect();
        let t = trend_r2(&line, &nulls).unwrap();
        assert!((t.r2 - 1.0).abs() < 1e-12);
        assert_eq!(t.p, 1.0 / 101.0);
        assert!((t.slope - 1.0).abs() < 1e-12);
        assert_eq!(trend_r2(&flat, &nulls).unwrap().r2, 0.0);
        assert_eq!(trend_r2(&flat, &nulls).unwrap().p, 1.0);
        assert!(trend_r2(&line, &nulls[..1]).is_err());
    }

    #[test]
    fn trend_p_is_uniform_under_exchangeability() {
        // KS statistic of 1000 permutation p-values (m = 100) against the
        // discrete uniform on {1/101, ..., 1}; critical value at α = 0.01
        // is about 1.63/sqrt(1000).
        let mut rng = rng_for(9);
        let n = 12;
        let mut ps = Vec::with_capacity(1000);
        for _ in 0..1000 {
            let mut draw = || {
                MeasureTrajectory::new("m", months(n), (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
            };
            let obs = draw();
            let nulls: Vec<MeasureTrajectory> = (0..100).map(|_| draw()).collect();
            ps.push(trend_r2(&obs, &nulls).unwrap().p);
        }
        ps.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for k in 1..=101 {
            let grid = k as f64 / 101.0;
            let emp = ps.iter().filter(|&&p| p <= grid + 1e-12).count() as f64 / ps.len() as f64;
            d = d.max((emp - grid).abs());
        }
        assert!(d < 1.63 / (1000f64).sqrt(), "KS distance {d}");
    }

    #[test]
    fn trajectory_validation() {
        assert!(MeasureTrajectory::new("m", months(3), vec![1.0, 2.0]).is_err());
        let mut back = months(3);
        back.reverse();
        assert!(MeasureTrajectory::new("m", back, vec![1.0; 3]).is_err());
        assert!(MeasureTrajectory::new("m", months(2), vec![1.0, f64::NAN]).is_err());
    }
}
