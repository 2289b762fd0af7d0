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

//! Natural cubic interpolating spline.

use std::collections::BTreeMap;

use crate::corpus::Month;
use crate::error::{Error, Result};

/// Month of the year at which yearly values are placed.
pub const KNOT_MONTH: u32 = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if x.len() < 3 {
            return Err(Error::TooFewObservations {
                required: 3,
                actual: x.len(),
            });
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("spline knots must be strictly increasing".into()));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            upper[i] = h[i + 1];
            rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
        }
        for i in 1..k {
            let f = h[i] / diag[i - 1];
            diag[i] -= f * upper[i - 1];
            rhs[i] -= f * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        for i in (0..k).rev() {
            let next = if i + 1 < k { m[i + 2] } else { 0.0 };
            m[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
        }
        Ok(NaturalSpline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    /// Cubic inside the knot range, linear continuation outside it.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.slope(0, false) * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.slope(n - 2, true) * (t - self.x[n - 1]);
        }
        let i = self.x.partition_point(|&k| k <= t) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// First derivative at the left (`right = false`) or right end of
    /// interval `i`.
    fn slope(&self, i: usize, right: bool) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let base = (self.y[i + 1] - self.y[i]) / h;
        if right {
            base + h * (self.m[i] + 2.0 * self.m[i + 1]) / 6.0
        } else {
            base - h * (2.0 * self.m[i] + self.m[i + 1]) / 6.0
        }
    }
}

/// Monthly values for every month of the covered years, from a natural
/// spline through yearly values placed at month [`KNOT_MONTH`].
pub fn spline_interpolate_monthly(yearly: &BTreeMap<i32, f64>) -> Result<Vec<(Month, f64)>> {
    if yearly.len() < 4 {
        return Err(Error::TooFewObservations {
            required: 4,
            actual: yearly.len(),
        });
    }
    let years: Vec<i32> = yearly.keys().copied().collect();
    if years.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::InvalidParameter("yearly values must cover consecutive years".into()));
    }
    let x: Vec<f64> = years
        .iter()
        .map(|&y| Month::new(y, KNOT_MONTH).map(|m| m.ordinal() as f64))
        .collect::<Result<_>>()?;
    let y: Vec<f64> = yearly.values().copied().collect();
    let spline = NaturalSpline::new(&x, &y)?;
    let first = Month::new(years[0], 1)?;
    let last = Month::new(*years.last().expect("nonempty"), 12)?;
    Ok((0..=first.months_until(last))
        .map(|k| {
            let m = first.offset(k);
            (m, spline.eval(m.ordinal() as f64))
        })
        .collect())
}
