//! Law-invariant risk measures on finite distributions.
//!
//! Losses are oriented so that larger values are worse. Every measure except
//! VaR is evaluated through its risk spectrum `sigma` as
//! `sum_i x_i (Phi(c_i) - Phi(c_{i-1}))`, where `Phi` is the antiderivative of
//! the spectrum and `c_i` the cumulative weights, which is exact on step
//! quantile functions.
//!
//! Levels follow the AVaR convention: `AVaR^alpha` averages the worst
//! `alpha`-fraction of the loss, so `alpha = 1` is the mean, and
//! `VaR^alpha = F^{-1}(1 - alpha)`, so `alpha = 0` is the essential supremum.

mod dist;
mod spectrum;

use serde::{Deserialize, Serialize};

pub use dist::{wasserstein, DiscreteDist, WEIGHT_SUM_TOL};
pub(crate) use dist::quantile_sorted;
pub use spectrum::StepSpectrum;

use crate::error::{Error, Result};

/// A law-invariant risk measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskSpec {
    Expectation,
    #[serde(rename = "var")]
    VaR { alpha: f64 },
    #[serde(rename = "avar")]
    AVaR { alpha: f64 },
    Spectral { spectrum: StepSpectrum },
    /// `lambda E + (1 - lambda) AVaR^alpha`.
    MeanAvarMix { lambda: f64, alpha: f64 },
    /// Proportional hazards transform, spectrum `nu (1 - u)^(nu - 1)`.
    Wang { nu: f64 },
    /// Gini spectrum `(1 - s) + 2 s u`.
    Gini { s: f64 },
}

impl RiskSpec {
    pub fn var(alpha: f64) -> Self {
        RiskSpec::VaR { alpha }
    }

    pub fn avar(alpha: f64) -> Self {
        RiskSpec::AVaR { alpha }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidRiskSpec(msg));
        match *self {
            RiskSpec::Expectation | RiskSpec::Spectral { .. } => Ok(()),
            RiskSpec::VaR { alpha } if !(0.0..1.0).contains(&alpha) => {
                bad(format!("VaR level {alpha} outside [0,1)"))
            }
            RiskSpec::AVaR { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                bad(format!("AVaR level {alpha} outside (0,1]"))
            }
            RiskSpec::MeanAvarMix { lambda, alpha }
                if !((0.0..=1.0).contains(&lambda) && alpha > 0.0 && alpha <= 1.0) =>
            {
                bad(format!("mixture ({lambda}, {alpha}) out of range"))
            }
            RiskSpec::Wang { nu } if !(nu > 0.0 && nu <= 1.0) => {
                bad(format!("Wang parameter {nu} outside (0,1]"))
            }
            RiskSpec::Gini { s } if !(s > 0.0 && s < 1.0) => {
                bad(format!("Gini parameter {s} outside (0,1)"))
            }
            _ => Ok(()),
        }
    }

    /// True for the coherent (positively homogeneous, subadditive) members.
    pub fn is_coherent(&self) -> bool {
        !matches!(self, RiskSpec::VaR { .. })
    }

    /// `Phi(u)`, the integrated spectrum; `None` for VaR.
    pub fn cumulative_spectrum(&self, u: f64) -> Option<f64> {
        let u = u.clamp(0.0, 1.0);
        Some(match self {
            RiskSpec::Expectation => u,
            RiskSpec::VaR { .. } => return None,
            RiskSpec::AVaR { alpha } => avar_cumulative(*alpha, u),
            RiskSpec::Spectral { spectrum } => spectrum.cumulative(u),
            RiskSpec::MeanAvarMix { lambda, alpha } => {
                lambda * u + (1.0 - lambda) * avar_cumulative(*alpha, u)
            }
            RiskSpec::Wang { nu } => 1.0 - (1.0 - u).powf(*nu),
            RiskSpec::Gini { s } => (1.0 - s) * u + s * u * u,
        })
    }

    /// Evaluates the measure on ascending `values` with non-negative weights
    /// of any positive total. Duplicate values and zero weights are allowed.
    pub fn eval_sorted(&self, values: &[f64], weights: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), weights.len());
        match self {
            RiskSpec::Expectation => {
                let total: f64 = weights.iter().sum();
                values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
            }
            RiskSpec::VaR { alpha } => quantile_sorted(values, weights, 1.0 - alpha),
            RiskSpec::Wang { nu } if values.first().is_some_and(|&v| v >= 0.0) => {
                wang_survival(values, weights, *nu)
            }
            _ => self.spectral_sorted(values, weights),
        }
    }

    fn spectral_sorted(&self, values: &[f64], weights: &[f64]) -> f64 {
        let total: f64 = weights.iter().sum();
        let mut cum = 0.0;
        let mut prev_phi = 0.0;
        let mut acc = 0.0;
        let n = values.len();
        for (k, (&v, &w)) in values.iter().zip(weights).enumerate() {
            if w <= 0.0 {
                continue;
            }
            cum += w;
            let c = if k + 1 == n { 1.0 } else { (cum / total).min(1.0) };
            let phi = self.cumulative_spectrum(c).expect("spectral measure");
            acc += v * (phi - prev_phi);
            prev_phi = phi;
        }
        acc + values.last().map_or(0.0, |&v| v * (1.0 - prev_phi))
    }
}

fn avar_cumulative(alpha: f64, u: f64) -> f64 {
    if alpha >= 1.0 {
        u
    } else {
        (u - (1.0 - alpha)).max(0.0) / alpha
    }
}

/// `int_0^inf (1 - F(t))^nu dt` for non-negative support.
fn wang_survival(values: &[f64], weights: &[f64], nu: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    let mut below = 0.0;
    let mut left = 0.0;
    let mut acc = 0.0;
    for (&v, &w) in values.iter().zip(weights) {
        let survival = (1.0 - below / total).max(0.0);
        acc += (v - left) * survival.powf(nu);
        left = v;
        below += w;
    }
    acc
}

/// Evaluates `spec` on `dist`.
pub fn evaluate(dist: &DiscreteDist, spec: &RiskSpec) -> f64 {
    spec.eval_sorted(dist.values(), dist.weights())
}

/// `F^{-1}(1 - alpha)`.
pub fn var(dist: &DiscreteDist, alpha: f64) -> f64 {
    dist.quantile(1.0 - alpha)
}

/// `(1/alpha) int_{1-alpha}^1 F^{-1}(t) dt`, exact.
pub fn avar(dist: &DiscreteDist, alpha: f64) -> f64 {
    RiskSpec::AVaR { alpha }.eval_sorted(dist.values(), dist.weights())
}

/// `min_u { u + E[(X - u)^+] / alpha }`, searched over the atoms, where the
/// piecewise-linear convex objective attains its minimum.
pub fn avar_ru(dist: &DiscreteDist, alpha: f64) -> f64 {
    avar_ru_with_argmin(dist.values(), dist.weights(), alpha).0
}

/// Rockafellar–Uryasev minimum and a minimizing atom over any weighted
/// sample (values need not be sorted). The objective is flat between the
/// quantile and the next atom; the largest minimizing atom is reported.
pub fn avar_ru_with_argmin(values: &[f64], weights: &[f64], alpha: f64) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    let objective: Vec<f64> = values
        .iter()
        .map(|&u| {
            let excess: f64 = values
                .iter()
                .zip(weights)
                .map(|(&x, &w)| w * (x - u).max(0.0))
                .sum::<f64>()
                / total;
            u + excess / alpha
        })
        .collect();
    let best = objective.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * best.abs().max(1.0);
    let arg = values
        .iter()
        .zip(&objective)
        .filter(|(_, &o)| o <= best + slack)
        .map(|(&u, _)| u)
        .fold(f64::NEG_INFINITY, f64::max);
    (best, arg)
}

/// `int_0^1 F^{-1}(t) sigma(t) dt` for a step spectrum.
pub fn spectral(dist: &DiscreteDist, spectrum: &StepSpectrum) -> f64 {
    RiskSpec::Spectral {
        spectrum: spectrum.clone(),
    }
    .eval_sorted(dist.values(), dist.weights())
}

/// Outer measure applied to the distribution of inner risk values.
pub fn composite(outer: &RiskSpec, inner_values: &DiscreteDist) -> f64 {
    evaluate(inner_values, outer)
}

/// Outer measure over posterior draws composed with an inner measure over
/// the observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcrSpec {
    pub outer: RiskSpec,
    pub inner: RiskSpec,
}

impl BcrSpec {
    pub fn new(outer: RiskSpec, inner: RiskSpec) -> Result<Self> {
        outer.validate()?;
        inner.validate()?;
        Ok(Self { outer, inner })
    }

    pub fn expectation() -> Self {
        Self {
            outer: RiskSpec::Expectation,
            inner: RiskSpec::Expectation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.outer.validate()?;
        self.inner.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u5() -> DiscreteDist {
        DiscreteDist::uniform(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap()
    }

    fn tens() -> DiscreteDist {
        DiscreteDist::uniform(&[10.0, 20.0, 30.0, 40.0, 50.0]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn var_examples() {
        assert_eq!(var(&u5(), 0.4), 3.0);
        assert_eq!(var(&u5(), 0.0), 5.0);
        let d = DiscreteDist::new([(0.2, 0.5), (0.8, 0.5)]).unwrap();
        assert_eq!(var(&d, 0.5), 0.2);
    }

    #[test]
    fn avar_examples() {
        close(avar(&u5(), 0.4), 4.5, 1e-12);
        close(avar(&u5(), 1.0), 3.0, 1e-12);
        close(avar(&tens(), 0.4), 45.0, 1e-12);
    }

    #[test]
    fn avar_ru_examples() {
        close(avar_ru(&u5(), 0.4), 4.5, 1e-12);
        close(avar_ru(&DiscreteDist::point(-2.5), 0.3), -2.5, 1e-12);
        let (v, u) = avar_ru_with_argmin(tens().values(), tens().weights(), 0.4);
        close(v, 45.0, 1e-12);
        assert_eq!(u, 40.0);
    }

    #[test]
    fn spectral_examples() {
        let flat = StepSpectrum::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        close(spectral(&u5(), &flat), 3.0, 1e-12);
        close(spectral(&u5(), &StepSpectrum::avar(0.4).unwrap()), 4.5, 1e-12);
    }

    #[test]
    fn gini_matches_pair_enumeration() {
        // The spectrum (1 - s) + 2 s u integrates to E[X] + (s/2) E|X - X'|.
        let oracle = |d: &DiscreteDist, s: f64| {
            let mut gmd = 0.0;
            for (x, wx) in d.atoms() {
                for (y, wy) in d.atoms() {
                    gmd += wx * wy * (x - y).abs();
                }
            }
            d.mean() + 0.5 * s * gmd
        };
        let coin = DiscreteDist::uniform(&[0.0, 1.0]).unwrap();
        close(evaluate(&coin, &RiskSpec::Gini { s: 0.5 }), 0.625, 1e-12);
        close(oracle(&coin, 0.5), 0.625, 1e-12);
        let d = DiscreteDist::new([(-1.0, 0.2), (0.5, 0.3), (2.0, 0.4), (7.0, 0.1)]).unwrap();
        for s in [0.1, 0.5, 0.9] {
            close(evaluate(&d, &RiskSpec::Gini { s }), oracle(&d, s), 1e-12);
        }
    }

    #[test]
    fn evaluate_examples() {
        let d = DiscreteDist::new([(1.0, 0.5), (3.0, 0.5)]).unwrap();
        close(evaluate(&d, &RiskSpec::Expectation), 2.0, 1e-15);
        let coin = DiscreteDist::uniform(&[0.0, 1.0]).unwrap();
        close(evaluate(&coin, &RiskSpec::Wang { nu: 0.5 }), 0.5f64.sqrt(), 1e-12);
        let mix = RiskSpec::MeanAvarMix {
            lambda: 0.5,
            alpha: 0.4,
        };
        close(evaluate(&u5(), &mix), 3.75, 1e-12);
    }

    #[test]
    fn wang_forms_agree_on_nonnegative_support() {
        let d = DiscreteDist::new([(0.5, 0.1), (1.0, 0.2), (3.0, 0.3), (3.5, 0.4)]).unwrap();
        for nu in [0.2, 0.5, 0.9, 1.0] {
            let spec = RiskSpec::Wang { nu };
            let survival = evaluate(&d, &spec);
            let quantile_form = spec.spectral_sorted(d.values(), d.weights());
            close(survival, quantile_form, 1e-12);
        }
        // negative atoms go through the quantile form and stay translation-equivariant
        let spec = RiskSpec::Wang { nu: 0.3 };
        close(evaluate(&d.shift(-10.0), &spec), evaluate(&d, &spec) - 10.0, 1e-12);
    }

    #[test]
    fn composite_examples() {
        let inner = DiscreteDist::uniform(&[0.2, 0.8]).unwrap();
        assert_eq!(composite(&RiskSpec::var(0.5), &inner), 0.2);
        assert_eq!(composite(&RiskSpec::var(0.4), &inner), 0.8);
        close(composite(&RiskSpec::Expectation, &inner), 0.5, 1e-15);
    }

    #[test]
    fn validation() {
        assert!(RiskSpec::var(1.0).validate().is_err());
        assert!(RiskSpec::var(0.0).validate().is_ok());
        assert!(RiskSpec::avar(0.0).validate().is_err());
        assert!(RiskSpec::avar(1.0).validate().is_ok());
        assert!(RiskSpec::Gini { s: 1.0 }.validate().is_err());
        assert!(RiskSpec::Wang { nu: 0.0 }.validate().is_err());
        assert!(BcrSpec::new(RiskSpec::avar(1.2), RiskSpec::Expectation).is_err());
    }

    #[test]
    fn unnormalized_kernels_agree() {
        let values = [1.0, 1.0, 2.0, 5.0];
        let weights = [1.0, 0.0, 2.0, 1.0];
        let d = DiscreteDist::normalized(values.iter().copied().zip(weights)).unwrap();
        for spec in [
            RiskSpec::Expectation,
            RiskSpec::var(0.3),
            RiskSpec::avar(0.3),
            RiskSpec::Wang { nu: 0.4 },
            RiskSpec::Gini { s: 0.3 },
        ] {
            close(spec.eval_sorted(&values, &weights), evaluate(&d, &spec), 1e-12);
        }
    }

    #[test]
    fn serde_round_trip() {
        let spec = BcrSpec::new(RiskSpec::var(0.6), RiskSpec::avar(0.4)).unwrap();
        let text = toml::to_string(&spec).unwrap();
        let back: BcrSpec = toml::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dist() -> impl Strategy<Value = DiscreteDist> {
            prop::collection::vec((-50.0f64..50.0, 0.01f64..1.0), 1..=12)
                .prop_map(|atoms| DiscreteDist::normalized(atoms).unwrap())
        }

        fn monetary() -> impl Strategy<Value = RiskSpec> {
            prop_oneof![
                Just(RiskSpec::Expectation),
                (0.0f64..0.99).prop_map(RiskSpec::var),
                (0.01f64..=1.0).prop_map(RiskSpec::avar),
                (0.0f64..=1.0, 0.01f64..=1.0)
                    .prop_map(|(lambda, alpha)| RiskSpec::MeanAvarMix { lambda, alpha }),
                (0.05f64..=1.0).prop_map(|nu| RiskSpec::Wang { nu }),
                (0.01f64..0.99).prop_map(|s| RiskSpec::Gini { s }),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]

            #[test]
            fn ru_equals_tail_integral(d in dist(), alpha in 0.01f64..=1.0) {
                prop_assert!((avar(&d, alpha) - avar_ru(&d, alpha)).abs() <= 1e-9);
            }

            #[test]
            fn avar_spectrum_matches(d in dist(), alpha in 0.01f64..=1.0) {
                let s = StepSpectrum::avar(alpha).unwrap();
                prop_assert!((spectral(&d, &s) - avar(&d, alpha)).abs() <= 1e-9);
            }

            #[test]
            fn translation(d in dist(), spec in monetary(), c in -20.0f64..20.0) {
                let lhs = evaluate(&d.shift(c), &spec);
                prop_assert!((lhs - evaluate(&d, &spec) - c).abs() <= 1e-9);
            }

            #[test]
            fn homogeneity(d in dist(), spec in monetary(), lambda in 0.0f64..5.0) {
                prop_assume!(spec.is_coherent());
                let lhs = evaluate(&d.scale(lambda), &spec);
                prop_assert!((lhs - lambda * evaluate(&d, &spec)).abs() <= 1e-9);
            }

            #[test]
            fn monotone(d in dist(), spec in monetary(), bumps in prop::collection::vec(0.0f64..3.0, 12)) {
                let up = DiscreteDist::normalized(
                    d.atoms().zip(&bumps).map(|((v, w), b)| (v + b, w)),
                ).unwrap();
                prop_assert!(evaluate(&up, &spec) >= evaluate(&d, &spec) - 1e-9);
            }

            #[test]
            fn non_expansive(a in dist(), b in dist(), spec in monetary()) {
                let gap = (evaluate(&a, &spec) - evaluate(&b, &spec)).abs();
                prop_assert!(gap <= wasserstein(&a, &b, f64::INFINITY) + 1e-9);
            }

            #[test]
            fn var_zero_is_supremum(d in dist()) {
                prop_assert_eq!(var(&d, 0.0), d.max());
            }
        }
    }
}
