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

//! Sliding-window trajectories and their temporal null ensemble.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::corpus::{Corpus, Month};
use crate::error::{Error, Result};
use crate::graphbuild::{windows_for_dates, CorpusWindow, NetworkBuilder, WindowSpec};
use crate::metrics::degree_strength;
use crate::nulls::{derive_seed, permuted_dates, standardize_trajectory};
use crate::scoring::{interdisciplinarity, residualize, trend_r2, MeasureTrajectory, TrendResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Strength,
    Swp,
    Deviance,
    Xi,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Strength, Measure::Swp, Measure::Deviance, Measure::Xi];

    pub fn label(self) -> &'static str {
        match self {
            Measure::Strength => "strength",
            Measure::Swp => "swp",
            Measure::Deviance => "deviance",
            Measure::Xi => "xi",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Scalar summaries of one window's network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMeasures {
    pub center: Month,
    pub docs: usize,
    pub edges: usize,
    /// Mean node strength.
    pub strength: f64,
    pub swp: f64,
    /// Mean per-edge deviance under the window's classification partition.
    pub deviance: f64,
    pub xi: f64,
}

impl WindowMeasures {
    pub fn get(&self, m: Measure) -> f64 {
        match m {
            Measure::Strength => self.strength,
            Measure::Swp => self.swp,
            Measure::Deviance => self.deviance,
            Measure::Xi => self.xi,
        }
    }
}

/// Measures of the `n`-topic network over one window's documents.
pub fn measure_window(builder: &NetworkBuilder<'_>, window: &CorpusWindow, n: usize, seed: u64) -> Result<WindowMeasures> {
    let net = builder.build(&window.docs, n, Some(window.window))?;
    let (_, strength) = degree_strength(&net);
    let classes = Partition::from_classifications(&net.classifications());
    let score = interdisciplinarity(&net, &classes, seed)?;
    Ok(WindowMeasures {
        center: window.center(),
        docs: window.docs.len(),
        edges: net.edge_count(),
        strength: strength.iter().sum::<f64>() / strength.len() as f64,
        swp: score.swp,
        deviance: score.classification_deviance,
        xi: score.xi,
    })
}

fn measure_all(builder: &NetworkBuilder<'_>, windows: &[CorpusWindow], n: usize, seed: u64) -> Result<Vec<WindowMeasures>> {
    windows
        .iter()
        .enumerate()
        .map(|(w, cw)| {
            measure_window(builder, cw, n, derive_seed(seed, w as u64))
                .map_err(|e| e.context(format!("window centered at {}", cw.center())))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalConfig {
    pub n: usize,
    pub spec: WindowSpec,
    pub nulls: usize,
    pub seed: u64,
}

/// Observed window measures and those of every temporal null member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalAnalysis {
    pub config: TemporalConfig,
    pub observed: Vec<WindowMeasures>,
    pub nulls: Vec<Vec<WindowMeasures>>,
}

/// Trend of one measure: on raw values, on null-standardized values, and on
/// standardized values after regressing out standardized strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub n: usize,
    pub measure: Measure,
    pub raw: TrendResult,
    pub standardized: TrendResult,
    pub strength_adjusted: Option<TrendResult>,
    pub mean_z: f64,
}

impl TemporalAnalysis {
    pub fn centers(&self) -> Vec<Month> {
        self.observed.iter().map(|w| w.center).collect()
    }

    fn series(&self, rows: &[WindowMeasures], m: Measure) -> Result<MeasureTrajectory> {
        MeasureTrajectory::new(m.label(), self.centers(), rows.iter().map(|w| w.get(m)).collect())
    }

    pub fn trajectory(&self, m: Measure) -> Result<MeasureTrajectory> {
        self.series(&self.observed, m)
    }

    pub fn null_trajectories(&self, m: Measure) -> Result<Vec<MeasureTrajectory>> {
        self.nulls.iter().map(|rows| self.series(rows, m)).collect()
    }

    /// Observed trajectory as z-scores against the null ensemble.
    pub fn standardized(&self, m: Measure) -> Result<MeasureTrajectory> {
        standardize_trajectory(&self.trajectory(m)?, &self.null_trajectories(m)?)
    }

    /// Every null member standardized against the same ensemble.
    pub fn standardized_nulls(&self, m: Measure) -> Result<Vec<MeasureTrajectory>> {
        let nulls = self.null_trajectories(m)?;
        nulls.iter().map(|t| standardize_trajectory(t, &nulls)).collect()
    }

    pub fn trends(&self) -> Result<Vec<TrendRow>> {
        let z_strength = self.standardized(Measure::Strength)?;
        let z_strength_nulls = self.standardized_nulls(Measure::Strength)?;
        Measure::ALL
            .iter()
            .map(|&m| {
                let raw = trend_r2(&self.trajectory(m)?, &self.null_trajectories(m)?)?;
                let z = self.standardized(m)?;
                let z_nulls = self.standardized_nulls(m)?;
                let standardized = trend_r2(&z, &z_nulls)?;
                let strength_adjusted = if m == Measure::Strength {
                    None
                } else {
                    let adjust = |t: &MeasureTrajectory, s: &MeasureTrajectory| -> Result<MeasureTrajectory> {
                        let mut out = t.clone();
                        out.values = residualize(&t.values, &s.values)?;
                        Ok(out)
                    };
                    let obs = adjust(&z, &z_strength)?;
                    let nulls: Vec<MeasureTrajectory> = z_nulls
                        .iter()
                        .zip(&z_strength_nulls)
                        .map(|(t, s)| adjust(t, s))
                        .collect::<Result<_>>()?;
                    Some(trend_r2(&obs, &nulls)?)
                };
                Ok(TrendRow {
                    n: self.config.n,
                    measure: m,
                    raw,
                    standardized,
                    strength_adjusted,
                    mean_z: z.values.iter().sum::<f64>() / z.len() as f64,
                })
            })
            .collect()
    }
}

/// Window measures of `corpus` and of `config.nulls` date-permuted copies.
/// Null member `k` permutes dates with `derive_seed(config.seed, k + 1)`;
/// the observed series uses stream 0.
pub fn temporal_analysis(corpus: &Corpus, config: &TemporalConfig) -> Result<TemporalAnalysis> {
    if config.nulls < 2 {
        return Err(Error::InvalidParameter(format!(
            "temporal analysis needs at least 2 nulls, got {}",
            config.nulls
        )));
    }
    let builder = NetworkBuilder::new(corpus);
    let span = corpus.span();
    let windows = windows_for_dates(&corpus.dates(), span, config.spec)?;
    log::info!("{} windows, {} topics, {} nulls", windows.len(), config.n, config.nulls);
    let observed = measure_all(&builder, &windows, config.n, derive_seed(config.seed, 0))?;

    let nulls: Vec<Vec<WindowMeasures>> = (0..config.nulls)
        .into_par_iter()
        .map(|k| {
            let member = derive_seed(config.seed, k as u64 + 1);
            let dates = permuted_dates(corpus, member);
            let windows = windows_for_dates(&dates, span, config.spec)?;
            let rows = measure_all(&builder, &windows, config.n, derive_seed(member, 1))
                .map_err(|e| e.context(format!("temporal null member {k}")))?;
            log::debug!("temporal null member {k} done");
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(TemporalAnalysis {
        config: *config,
        observed,
        nulls,
    })
}
