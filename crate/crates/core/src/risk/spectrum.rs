use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous step risk spectrum on `[0, 1]`.
///
/// `levels[j]` is the value of the spectrum on `[knots[j], knots[j + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpectrum", into = "RawSpectrum")]
pub struct StepSpectrum {
    knots: Vec<f64>,
    levels: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSpectrum {
    knots: Vec<f64>,
    levels: Vec<f64>,
}

impl TryFrom<RawSpectrum> for StepSpectrum {
    type Error = Error;

    fn try_from(raw: RawSpectrum) -> Result<Self> {
        StepSpectrum::new(raw.knots, raw.levels)
    }
}

impl From<StepSpectrum> for RawSpectrum {
    fn from(s: StepSpectrum) -> Self {
        RawSpectrum {
            knots: s.knots,
            levels: s.levels,
        }
    }
}

impl StepSpectrum {
    /// Validates knots `0 = k_0 < ... < k_m = 1` and `m` levels that are
    /// non-negative, non-decreasing and integrate to one within `1e-9`.
    pub fn new(knots: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidRiskSpec(msg));
        if knots.len() < 2 || levels.len() + 1 != knots.len() {
            return bad(format!(
                "need m+1 knots for m levels, got {} knots and {} levels",
                knots.len(),
                levels.len()
            ));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return bad("knots must start at 0 and end at 1".into());
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("knots must be strictly increasing".into());
        }
        if levels.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
            return bad("spectrum must be non-negative".into());
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return bad("spectrum must be non-decreasing".into());
        }
        let mass: f64 = levels
            .iter()
            .zip(knots.windows(2))
            .map(|(l, k)| l * (k[1] - k[0]))
            .sum();
        if (mass - 1.0).abs() > 1e-9 {
            return bad(format!("spectrum integrates to {mass}, expected 1"));
        }
        Ok(Self { knots, levels })
    }

    /// Spectrum of `AVaR^alpha`: `(1/alpha) 1[1-alpha, 1]`.
    pub fn avar(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidRiskSpec(format!("AVaR level {alpha} outside (0,1]")));
        }
        if alpha == 1.0 {
            return Self::new(vec![0.0, 1.0], vec![1.0]);
        }
        Self::new(vec![0.0, 1.0 - alpha, 1.0], vec![0.0, 1.0 / alpha])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Value of the spectrum at `u`.
    pub fn value(&self, u: f64) -> f64 {
        let j = self.knots[1..].partition_point(|&k| k <= u);
        self.levels[j.min(self.levels.len() - 1)]
    }

    /// `Phi(u) = int_0^u sigma`.
    pub fn cumulative(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (l, k) in self.levels.iter().zip(self.knots.windows(2)) {
            if u <= k[0] {
                break;
            }
            acc += l * (u.min(k[1]) - k[0]);
        }
        acc
    }
}
