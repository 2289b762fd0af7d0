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

//! Small-sample statistics: signed-rank test, correlations, regression
//! residuals and the dependent-correlation comparison.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Largest sample for which the signed-rank null is enumerated exactly.
pub const WILCOXON_EXACT_MAX: usize = 25;

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

fn at_least(n: usize, required: usize) -> Result<()> {
    if n < required {
        return Err(Error::TooFewObservations { required, actual: n });
    }
    Ok(())
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences `x − y`.
    pub statistic: f64,
    pub n: usize,
    pub p_two_sided: f64,
    /// `P(W⁺ ≥ observed)`: evidence that `x` tends to exceed `y`.
    pub p_greater: f64,
    /// `P(W⁺ ≤ observed)`.
    pub p_less: f64,
    pub method: WilcoxonMethod,
}

/// Midranks of `values` (1-based), with the tie-group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Paired signed-rank test on `x − y`. Zero differences are dropped; ties
/// get midranks. Exact null distribution for up to
/// [`WILCOXON_EXACT_MAX`] pairs, normal approximation with tie and
/// continuity correction above.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    same_len(x, y)?;
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|&d| d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::IdenticalDeviances);
    }
    at_least(diffs.len(), 5)?;
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w: f64 = ranks.iter().zip(&diffs).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();

    if n <= WILCOXON_EXACT_MAX {
        // Doubled midranks are integers, so the null distribution of 2W⁺
        // over all 2^n sign patterns is a subset-sum count.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0f64; total + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let all = 2f64.powi(n as i32);
        let obs = (2.0 * w).round() as usize;
        let p_greater = counts[obs..].iter().sum::<f64>() / all;
        let p_less = counts[..=obs].iter().sum::<f64>() / all;
        return Ok(WilcoxonResult {
            statistic: w,
            n,
            p_two_sided: (2.0 * p_greater.min(p_less)).min(1.0),
            p_greater,
            p_less,
            method: WilcoxonMethod::Exact,
        });
    }

    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let sd = var.sqrt();
    let normal = Normal::standard();
    let p_greater = 1.0 - normal.cdf((w - mu - 0.5) / sd);
    let p_less = normal.cdf((w - mu + 0.5) / sd);
    Ok(WilcoxonResult {
        statistic: w,
        n,
        p_two_sided: (2.0 * p_greater.min(p_less)).min(1.0),
        p_greater,
        p_less,
        method: WilcoxonMethod::NormalApproximation,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    same_len(x, y)?;
    at_least(x.len(), 2)?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::ZeroVariance("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Least-squares `(intercept, slope)` of `y` on `x`. A constant `x` gives
/// slope 0.
pub fn linear_fit(y: &[f64], x: &[f64]) -> Result<(f64, f64)> {
    same_len(y, x)?;
    at_least(y.len(), 2)?;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Ok((my, 0.0));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// `y` minus its least-squares projection on `(1, x)`.
pub fn residualize(y: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    same_len(y, x)?;
    at_least(y.len(), 3)?;
    let (a, b) = linear_fit(y, x)?;
    Ok(y.iter().zip(x).map(|(yi, xi)| yi - a - b * xi).collect())
}

/// Correlation of `x` and `y` after regressing each on `(1, z)`.
pub fn partial_correlation(x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    same_len(x, y)?;
    same_len(x, z)?;
    at_least(x.len(), 4)?;
    let rx = residualize(x, z)?;
    let ry = residualize(y, z)?;
    let scale = |v: &[f64], r: &[f64]| {
        let m = mean(v);
        let ss: f64 = v.iter().map(|a| (a - m) * (a - m)).sum();
        let rr: f64 = r.iter().map(|a| a * a).sum();
        rr <= 1e-24 * ss.max(f64::MIN_POSITIVE)
    };
    if scale(x, &rx) || scale(y, &ry) {
        return Err(Error::ZeroVariance("residuals vanish after removing the control series".into()));
    }
    pearson(&rx, &ry)
}

/// `r_xy·z = (r_xy − r_xz r_yz) / sqrt((1 − r_xz²)(1 − r_yz²))`.
pub fn partial_correlation_closed_form(r_xy: f64, r_xz: f64, r_yz: f64) -> Result<f64> {
    let den = ((1.0 - r_xz * r_xz) * (1.0 - r_yz * r_yz)).sqrt();
    if den == 0.0 || !den.is_finite() {
        return Err(Error::UndefinedCorrelation("control series perfectly correlated".into()));
    }
    Ok((r_xy - r_xz * r_yz) / den)
}

/// Two-sided p of `H0: ρ = 0` for a (partial) correlation with `df`
/// residual degrees of freedom, via `t = r sqrt(df / (1 − r²))`.
pub fn correlation_p_value(r: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::TooFewObservations {
            required: 1,
            actual: 0,
        });
    }
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((2.0 * (1.0 - dist.cdf(t.abs()))).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependentCorrelationTest {
    pub statistic: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

/// Williams' t for `H0: ρ_xy = ρ_xz` where both correlations share `x`
/// and are measured on the same `n` observations. `df = n − 3`.
pub fn compare_dependent_correlations(r_xy: f64, r_xz: f64, r_yz: f64, n: usize) -> Result<DependentCorrelationTest> {
    at_least(n, 10)?;
    for (name, r) in [("r_xy", r_xy), ("r_xz", r_xz), ("r_yz", r_yz)] {
        if !(r.abs() < 1.0) {
            return Err(Error::UndefinedCorrelation(format!("{name} = {r} is not inside (-1, 1)")));
        }
    }
    let nf = n as f64;
    let det = 1.0 - r_xy * r_xy - r_xz * r_xz - r_yz * r_yz + 2.0 * r_xy * r_xz * r_yz;
    let rbar = (r_xy + r_xz) / 2.0;
    let den = 2.0 * ((nf - 1.0) / (nf - 3.0)) * det + rbar * rbar * (1.0 - r_yz).powi(3);
    if !(den > 0.0) {
        return Err(Error::UndefinedCorrelation("correlation matrix is not positive definite".into()));
    }
    let t = (r_xy - r_xz) * ((nf - 1.0) * (1.0 + r_yz) / den).sqrt();
    let df = nf - 3.0;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).min(1.0);
    Ok(DependentCorrelationTest {
        statistic: t,
        df,
        p_two_sided: p,
    })
}

/// Variance explained by a straight line through `values` against their
/// index. Constant series give 0.
pub fn r_squared_on_index(values: &[f64]) -> Result<f64> {
    at_least(values.len(), 3)?;
    let idx: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
    let m = mean(values);
    let sst: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    if sst == 0.0 {
        return Ok(0.0);
    }
    let res = residualize(values, &idx)?;
    let sse: f64 = res.iter().map(|r| r * r).sum();
    Ok((1.0 - sse / sst).clamp(0.0, 1.0))
}

/// `(1 + k) / (1 + m)` where `k` of the `m` null statistics reach `observed`.
pub fn permutation_p(observed: f64, nulls: &[f64], at_least_as_extreme: impl Fn(f64, f64) -> bool) -> f64 {
    let k = nulls.iter().filter(|&&v| at_least_as_extreme(v, observed)).count();
    (1 + k) as f64 / (1 + nulls.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nulls::rng_for;
    use proptest::prelude::*;
    use rand::Rng;

    /// Enumerate all sign patterns directly.
    fn brute_wilcoxon(diffs: &[f64]) -> (f64, f64) {
        let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let (ranks, _) = midranks(&abs);
        let obs: f64 = ranks.iter().zip(diffs).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();
        let n = diffs.len();
        let (mut ge, mut le) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if w >= obs - 1e-9 {
                ge += 1;
            }
            if w <= obs + 1e-9 {
                le += 1;
            }
        }
        let all = (1u64 << n) as f64;
        (ge as f64 / all, le as f64 / all)
    }

    #[test]
    fn wilcoxon_examples() {
        let x = [2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [1.0, 1.0, 1.0, 1.0, 1.0];
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.statistic, 15.0);
        assert_eq!(r.p_greater, 1.0 / 32.0);
        assert_eq!(r.p_two_sided, 2.0 / 32.0);
        assert_eq!(r.method, WilcoxonMethod::Exact);
        assert!(matches!(wilcoxon_signed_rank(&x, &x), Err(Error::IdenticalDeviances)));
        assert!(matches!(
            wilcoxon_signed_rank(&x[..4], &y[..4]),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration() {
        let mut rng = rng_for(1);
        for n in 5..=10 {
            for _ in 0..20 {
                // coarse values force ties
                let d: Vec<f64> = (0..n)
                    .map(|_| {
                        let v = rng.random_range(1..5) as f64;
                        if rng.random_bool(0.5) { v } else { -v }
                    })
                    .collect();
                let zeros = vec![0.0; n];
                let r = wilcoxon_signed_rank(&d, &zeros).unwrap();
                let (ge, le) = brute_wilcoxon(&d);
                assert!((r.p_greater - ge).abs() < 1e-12);
                assert!((r.p_less - le).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wilcoxon_normal_matches_monte_carlo() {
        let mut rng = rng_for(2);
        let x: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-0.6..0.45)).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.method, WilcoxonMethod::NormalApproximation);
        let abs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).collect();
        let (ranks, _) = midranks(&abs);
        let mut ge = 0usize;
        let draws = 200_000;
        for _ in 0..draws {
            let w: f64 = ranks.iter().filter(|_| rng.random_bool(0.5)).sum();
            if w >= r.statistic {
                ge += 1;
            }
        }
        let mc = ge as f64 / draws as f64;
        assert!((r.p_greater - mc).abs() < 0.01, "{} vs {mc}", r.p_greater);
    }

    #[test]
    fn partial_correlation_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let z = [5.0; 4];
        assert!((partial_correlation(&x, &x, &z).unwrap() - 1.0).abs() < 1e-12);
        let y = [2.0, 1.0, 4.0, 3.0];
        assert!(partial_correlation(&x, &y, &y).is_err());
    }

    #[test]
    fn partial_correlation_two_methods_agree() {
        let mut rng = rng_for(3);
        for _ in 0..50 {
            let z: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = z.iter().map(|v| 0.6 * v + rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = z.iter().zip(&x).map(|(a, b)| -0.4 * a + 0.3 * b + rng.random_range(-1.0..1.0)).collect();
            let r1 = partial_correlation(&x, &y, &z).unwrap();
            let r2 = partial_correlation_closed_form(
                pearson(&x, &y).unwrap(),
                pearson(&x, &z).unwrap(),
                pearson(&y, &z).unwrap(),
            )
            .unwrap();
            assert!((r1 - r2).abs() < 1e-10);
        }
    }

    #[test]
    fn williams_reference_example() {
        // r.test(n = 103, r12 = .4, r13 = .5, r23 = .1) in the R psych package
        // documentation reports t = -0.89, p = 0.37.
        let t = compare_dependent_correlations(0.4, 0.5, 0.1, 103).unwrap();
        assert!((t.statistic - (-0.891)).abs() < 5e-4, "{}", t.statistic);
        assert!((t.p_two_sided - 0.37).abs() < 0.005, "{}", t.p_two_sided);
        assert_eq!(t.df, 100.0);
        // |R| = 0.62, denominator = 2·(102/100)·0.62 + 0.45²·0.9³
        let by_hand = -0.1 * (102.0 * 1.1 / (2.0 * 1.02 * 0.62 + 0.2025 * 0.729_f64)).sqrt();
        assert!((t.statistic - by_hand).abs() < 1e-12);
    }

    #[test]
    fn williams_edge_cases() {
        let t = compare_dependent_correlations(0.3, 0.3, 0.2, 50).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_two_sided, 1.0);
        assert!(compare_dependent_correlations(0.3, 0.2, 0.1, 9).is_err());
        assert!(compare_dependent_correlations(1.0, 0.2, 0.1, 20).is_err());
    }

    #[test]
    fn williams_rejection_rate_under_null() {
        // Trivariate normal with ρ_xy = ρ_xz = 0.4, ρ_yz = 0.3.
        use rand_distr::StandardNormal;
        let mut rng = rng_for(4);
        let n = 60;
        let trials = 2000;
        let mut rejects = 0;
        for _ in 0..trials {
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            let mut z = Vec::with_capacity(n);
            for _ in 0..n {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let c: f64 = rng.sample(StandardNormal);
                // Cholesky of [[1,.4,.4],[.4,1,.3],[.4,.3,1]]
                let l21 = 0.4;
                let l22 = (1.0f64 - 0.16).sqrt();
                let l31 = 0.4;
                let l32 = (0.3 - 0.16) / l22;
                let l33 = (1.0 - l31 * l31 - l32 * l32).sqrt();
                x.push(a);
                y.push(l21 * a + l22 * b);
                z.push(l31 * a + l32 * b + l33 * c);
            }
            let t = compare_dependent_correlations(
                pearson(&x, &y).unwrap(),
                pearson(&x, &z).unwrap(),
                pearson(&y, &z).unwrap(),
                n,
            )
            .unwrap();
            if t.p_two_sided < 0.05 {
                rejects += 1;
            }
        }
        let rate = rejects as f64 / trials as f64;
        assert!((0.03..=0.07).contains(&rate), "{rate}");
    }

    #[test]
    fn correlation_p_examples() {
        assert_eq!(correlation_p_value(0.0, 10.0).unwrap(), 1.0);
        // r = 0.5 with 18 df: t = 0.5·sqrt(18/0.75) = 2.449, two-sided p ≈ 0.0248
        assert!((correlation_p_value(0.5, 18.0).unwrap() - 0.0248).abs() < 5e-4);
        assert_eq!(correlation_p_value(1.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn residualize_examples() {
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!(residualize(&y, &x).unwrap().iter().all(|r| r.abs() < 1e-12));
        let c = [4.0; 4];
        let y = [1.0, 2.0, 3.0, 6.0];
        assert_eq!(residualize(&y, &c).unwrap(), vec![-2.0, -1.0, 0.0, 3.0]);
    }

    #[test]
    fn r_squared_examples() {
        assert!((r_squared_on_index(&[1.0, 3.0, 5.0, 7.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r_squared_on_index(&[2.0; 5]).unwrap(), 0.0);
        assert!(r_squared_on_index(&[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn residuals_orthogonal(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 40)) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let r = residualize(&y, &x).unwrap();
            let scale: f64 = y.iter().map(|v| v.abs()).sum::<f64>() * x.iter().map(|v| v.abs()).sum::<f64>() + 1.0;
            prop_assert!(r.iter().sum::<f64>().abs() < 1e-10 * scale);
            prop_assert!(r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-10 * scale);
        }
    }
}
