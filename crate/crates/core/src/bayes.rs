//! Conjugate beliefs over the unknown parameter `theta`.
//!
//! A belief is a family tag plus a finite hyper-parameter vector `h`. For the
//! exponential families the update is additive, `h' = h + H(xi)`; the
//! known-variance normal model is the exception and is updated in closed form.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{
    Bernoulli as BernoulliSampler, Beta as BetaSampler, Distribution, Exp as ExpSampler, Gamma as GammaSampler,
    Normal as NormalSampler, Poisson as PoissonSampler,
};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Gamma, Normal};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{invalid, Error, Result};
use crate::risk::DiscreteDist;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConjugateFamily {
    BetaBernoulli,
    GammaPoisson,
    NormalKnownVar { sigma2: f64 },
    GammaExponential,
    DirichletCategorical { k: usize },
}

impl ConjugateFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ConjugateFamily::BetaBernoulli => "beta-bernoulli",
            ConjugateFamily::GammaPoisson => "gamma-poisson",
            ConjugateFamily::NormalKnownVar { .. } => "normal-known-variance",
            ConjugateFamily::GammaExponential => "gamma-exponential",
            ConjugateFamily::DirichletCategorical { .. } => "dirichlet-categorical",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ConjugateFamily::NormalKnownVar { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => {
                Err(invalid("sigma2", format!("{sigma2} must be positive")))
            }
            ConjugateFamily::DirichletCategorical { k } if k < 2 => {
                Err(invalid("k", format!("{k} categories, need at least 2")))
            }
            _ => Ok(()),
        }
    }

    /// Length of the hyper-parameter vector.
    pub fn dim(&self) -> usize {
        match *self {
            ConjugateFamily::DirichletCategorical { k } => k,
            _ => 2,
        }
    }

    /// True when observations live on a lattice.
    pub fn is_discrete(&self) -> bool {
        !matches!(
            self,
            ConjugateFamily::NormalKnownVar { .. } | ConjugateFamily::GammaExponential
        )
    }

    pub fn check_obs(&self, obs: f64) -> Result<()> {
        let ok = match *self {
            ConjugateFamily::BetaBernoulli => obs == 0.0 || obs == 1.0,
            ConjugateFamily::GammaPoisson => obs >= 0.0 && obs.fract() == 0.0 && obs.is_finite(),
            ConjugateFamily::NormalKnownVar { .. } => obs.is_finite(),
            ConjugateFamily::GammaExponential => obs > 0.0 && obs.is_finite(),
            ConjugateFamily::DirichletCategorical { k } => {
                obs >= 1.0 && obs <= k as f64 && obs.fract() == 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::SupportViolation {
                family: self.name(),
                obs,
            })
        }
    }

    /// The additive sufficient statistic `H(xi)`; `None` for the normal model.
    pub fn sufficient_stat(&self, obs: f64) -> Option<Vec<f64>> {
        match *self {
            ConjugateFamily::BetaBernoulli => Some(vec![obs, 1.0 - obs]),
            ConjugateFamily::GammaPoisson => Some(vec![obs, 1.0]),
            ConjugateFamily::GammaExponential => Some(vec![1.0, obs]),
            ConjugateFamily::DirichletCategorical { k } => {
                let mut e = vec![0.0; k];
                e[obs as usize - 1] = 1.0;
                Some(e)
            }
            ConjugateFamily::NormalKnownVar { .. } => None,
        }
    }

    /// Exact posterior hyper-parameters after one observation, without
    /// support checks.
    pub fn successor(&self, hyper: &[f64], obs: f64) -> Vec<f64> {
        match *self {
            ConjugateFamily::NormalKnownVar { sigma2 } => {
                let (m, d2) = (hyper[0], hyper[1]);
                let denom = sigma2 + d2;
                vec![(sigma2 * m + d2 * obs) / denom, sigma2 * d2 / denom]
            }
            _ => {
                let stat = self.sufficient_stat(obs).expect("additive family");
                hyper.iter().zip(stat).map(|(h, s)| h + s).collect()
            }
        }
    }

    /// Mass (or density) of `obs` under `P_theta`.
    pub fn likelihood(&self, theta: &[f64], obs: f64) -> f64 {
        match *self {
            ConjugateFamily::BetaBernoulli => {
                if obs == 1.0 {
                    theta[0]
                } else {
                    1.0 - theta[0]
                }
            }
            ConjugateFamily::GammaPoisson => {
                let l = theta[0];
                if l == 0.0 {
                    return if obs == 0.0 { 1.0 } else { 0.0 };
                }
                (obs * l.ln() - l - ln_gamma(obs + 1.0)).exp()
            }
            ConjugateFamily::NormalKnownVar { sigma2 } => {
                let z = obs - theta[0];
                (-0.5 * z * z / sigma2).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt()
            }
            ConjugateFamily::GammaExponential => theta[0] * (-theta[0] * obs).exp(),
            ConjugateFamily::DirichletCategorical { .. } => theta[obs as usize - 1],
        }
    }

    /// `theta`-weights on a fixed observation grid: the probability mass
    /// function for lattice families and midpoint density mass otherwise,
    /// renormalized over the grid.
    pub fn likelihood_weights(&self, theta: &[f64], support: &[f64]) -> Vec<f64> {
        let mut w: Vec<f64> = support.iter().map(|&x| self.likelihood(theta, x)).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.iter_mut().for_each(|x| *x /= total);
        }
        w
    }

    /// One draw of `xi` from `P_theta`.
    pub fn sample_obs<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> Result<f64> {
        let bad = |e: String| invalid("theta", e);
        Ok(match *self {
            ConjugateFamily::BetaBernoulli => {
                let b = BernoulliSampler::new(theta[0]).map_err(|e| bad(e.to_string()))?;
                if b.sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
            ConjugateFamily::GammaPoisson => {
                if theta[0] == 0.0 {
                    return Ok(0.0);
                }
                PoissonSampler::new(theta[0]).map_err(|e| bad(e.to_string()))?.sample(rng)
            }
            ConjugateFamily::NormalKnownVar { sigma2 } => NormalSampler::new(theta[0], sigma2.sqrt())
                .map_err(|e| bad(e.to_string()))?
                .sample(rng),
            ConjugateFamily::GammaExponential => ExpSampler::new(theta[0]).map_err(|e| bad(e.to_string()))?.sample(rng),
            ConjugateFamily::DirichletCategorical { .. } => {
                (WeightedIndex::new(theta).map_err(|e| bad(e.to_string()))?.sample(rng) + 1) as f64
            }
        })
    }

    /// Maximum-likelihood estimate from observations.
    pub fn mle(&self, obs: &[f64]) -> Result<Theta> {
        if obs.is_empty() {
            return Err(Error::DegenerateData("no observations".into()));
        }
        for &x in obs {
            self.check_obs(x)?;
        }
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        match *self {
            ConjugateFamily::GammaExponential => {
                if mean <= 0.0 {
                    return Err(Error::DegenerateData("exponential sample mean is zero".into()));
                }
                Ok(Theta::scalar(1.0 / mean))
            }
            ConjugateFamily::DirichletCategorical { k } => {
                let mut freq = vec![0.0; k];
                for &x in obs {
                    freq[x as usize - 1] += 1.0;
                }
                let n = obs.len() as f64;
                Ok(Theta(freq.into_iter().map(|c| c / n).collect()))
            }
            _ => Ok(Theta::scalar(mean)),
        }
    }
}

/// A value of the unknown parameter: a scalar, or category probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn scalar(v: f64) -> Self {
        Theta(vec![v])
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Rule for cutting the predictive distribution down to finitely many atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationRule {
    /// Largest lattice atom, or half-width of the continuous window. Derived
    /// from `tail` or `sds` when absent.
    pub radius: Option<f64>,
    /// Target tail mass for lattice families.
    pub tail: f64,
    /// Half-width in predictive standard deviations for continuous families.
    pub sds: f64,
    /// Cell width for continuous families.
    pub step: f64,
}

impl Default for TruncationRule {
    fn default() -> Self {
        Self {
            radius: None,
            tail: 1e-5,
            sds: 6.0,
            step: 0.5,
        }
    }
}

impl TruncationRule {
    pub fn radius(r: f64) -> Self {
        Self {
            radius: Some(r),
            ..Self::default()
        }
    }
}

/// A truncated predictive distribution and the mass cut away.
#[derive(Debug, Clone)]
pub struct PredictiveSupport {
    pub dist: DiscreteDist,
    pub tail_mass: f64,
}

/// Posterior mean and variance, componentwise for the Dirichlet family.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl Moments {
    /// `(mean, variance)` of a scalar family.
    pub fn scalar(&self) -> (f64, f64) {
        (self.mean[0], self.variance[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    family: ConjugateFamily,
    hyper: Vec<f64>,
}

impl Belief {
    pub fn new(family: ConjugateFamily, hyper: Vec<f64>) -> Result<Self> {
        family.validate()?;
        if hyper.len() != family.dim() {
            return Err(invalid(
                "hyper",
                format!("{} needs {} components, got {}", family.name(), family.dim(), hyper.len()),
            ));
        }
        if hyper.iter().any(|h| !h.is_finite()) {
            return Err(invalid("hyper", "non-finite component"));
        }
        let positive = match family {
            ConjugateFamily::NormalKnownVar { .. } => hyper[1] > 0.0,
            _ => hyper.iter().all(|&h| h > 0.0),
        };
        if !positive {
            return Err(invalid("hyper", format!("{hyper:?} not valid for {}", family.name())));
        }
        Ok(Self { family, hyper })
    }

    pub fn beta(m: f64, d: f64) -> Result<Self> {
        Self::new(ConjugateFamily::BetaBernoulli, vec![m, d])
    }

    pub fn gamma_poisson(m: f64, d: f64) -> Result<Self> {
        Self::new(ConjugateFamily::GammaPoisson, vec![m, d])
    }

    pub fn family(&self) -> ConjugateFamily {
        self.family
    }

    pub fn hyper(&self) -> &[f64] {
        &self.hyper
    }

    pub fn update(&self, obs: f64) -> Result<Self> {
        self.family.check_obs(obs)?;
        Ok(Self {
            family: self.family,
            hyper: self.family.successor(&self.hyper, obs),
        })
    }

    pub fn update_batch(&self, obs: &[f64]) -> Result<Self> {
        obs.iter().try_fold(self.clone(), |b, &x| b.update(x))
    }

    /// Posterior predictive mass (lattice families) or density at `obs`.
    pub fn predictive_weight(&self, obs: f64) -> Result<f64> {
        self.family.check_obs(obs)?;
        let h = &self.hyper;
        Ok(match self.family {
            ConjugateFamily::BetaBernoulli => {
                let p1 = h[0] / (h[0] + h[1]);
                if obs == 1.0 {
                    p1
                } else {
                    1.0 - p1
                }
            }
            ConjugateFamily::GammaPoisson => {
                let (m, d) = (h[0], h[1]);
                (ln_gamma(obs + m) - ln_gamma(m) - ln_gamma(obs + 1.0) + m * (d / (d + 1.0)).ln()
                    - obs * (d + 1.0).ln())
                .exp()
            }
            ConjugateFamily::NormalKnownVar { sigma2 } => {
                let v = h[1] + sigma2;
                let z = obs - h[0];
                (-0.5 * z * z / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
            }
            ConjugateFamily::GammaExponential => {
                let (m, d) = (h[0], h[1]);
                m * d.powf(m) / (d + obs).powf(m + 1.0)
            }
            ConjugateFamily::DirichletCategorical { .. } => {
                h[obs as usize - 1] / h.iter().sum::<f64>()
            }
        })
    }

    /// Finite predictive law used by the dynamic-programming sweeps.
    pub fn predictive_support(&self, rule: &TruncationRule) -> Result<PredictiveSupport> {
        let h = &self.hyper;
        let cells: Vec<(f64, f64)> = match self.family {
            ConjugateFamily::BetaBernoulli => vec![(0.0, self.predictive_weight(0.0)?), (1.0, self.predictive_weight(1.0)?)],
            ConjugateFamily::DirichletCategorical { k } => (1..=k)
                .map(|c| Ok((c as f64, self.predictive_weight(c as f64)?)))
                .collect::<Result<_>>()?,
            ConjugateFamily::GammaPoisson => {
                let mut atoms = Vec::new();
                let mut cum = 0.0;
                let mut x = 0.0;
                loop {
                    if let Some(r) = rule.radius {
                        if x > r {
                            break;
                        }
                    } else if 1.0 - cum < rule.tail {
                        break;
                    }
                    let w = self.predictive_weight(x)?;
                    atoms.push((x, w));
                    cum += w;
                    x += 1.0;
                }
                atoms
            }
            ConjugateFamily::NormalKnownVar { sigma2 } => {
                let sd = (h[1] + sigma2).sqrt();
                let law = Normal::new(h[0], sd).map_err(|e| invalid("hyper", e.to_string()))?;
                let half = rule.radius.unwrap_or(rule.sds * sd);
                grid_cells(h[0] - half, h[0] + half, rule.step, |x| law.cdf(x))
            }
            ConjugateFamily::GammaExponential => {
                let (m, d) = (h[0], h[1]);
                let cdf = |x: f64| 1.0 - (d / (d + x.max(0.0))).powf(m);
                let hi = match rule.radius {
                    Some(r) => r,
                    None => {
                        // Lomax quantile at 1 - tail, capped by the moment-based width when finite
                        let q = d * (rule.tail.powf(-1.0 / m) - 1.0);
                        if m > 2.0 {
                            let mean = d / (m - 1.0);
                            let sd = (d * d * m / ((m - 1.0).powi(2) * (m - 2.0))).sqrt();
                            q.min(mean + rule.sds * sd)
                        } else {
                            q
                        }
                    }
                };
                grid_cells(0.0, hi, rule.step, cdf)
            }
        };
        let captured: f64 = cells.iter().map(|c| c.1).sum();
        let cells: Vec<(f64, f64)> = cells.into_iter().filter(|c| c.1 > 0.0).collect();
        if cells.is_empty() || captured <= 0.0 {
            return Err(Error::EmptySupport);
        }
        Ok(PredictiveSupport {
            dist: DiscreteDist::normalized(cells)?,
            tail_mass: (1.0 - captured).max(0.0),
        })
    }

    pub fn posterior_moments(&self) -> Moments {
        let h = &self.hyper;
        match self.family {
            ConjugateFamily::BetaBernoulli => {
                let s = h[0] + h[1];
                Moments {
                    mean: vec![h[0] / s],
                    variance: vec![h[0] * h[1] / (s * s * (s + 1.0))],
                }
            }
            ConjugateFamily::GammaPoisson | ConjugateFamily::GammaExponential => Moments {
                mean: vec![h[0] / h[1]],
                variance: vec![h[0] / (h[1] * h[1])],
            },
            ConjugateFamily::NormalKnownVar { .. } => Moments {
                mean: vec![h[0]],
                variance: vec![h[1]],
            },
            ConjugateFamily::DirichletCategorical { .. } => {
                let s: f64 = h.iter().sum();
                Moments {
                    mean: h.iter().map(|a| a / s).collect(),
                    variance: h.iter().map(|a| a * (s - a) / (s * s * (s + 1.0))).collect(),
                }
            }
        }
    }

    /// `n` independent posterior draws.
    pub fn sample_theta<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Theta>> {
        if n == 0 {
            return Err(invalid("n", "at least one draw is required"));
        }
        let h = &self.hyper;
        let bad = |e: String| invalid("hyper", e);
        Ok(match self.family {
            ConjugateFamily::BetaBernoulli => {
                let s = BetaSampler::new(h[0], h[1]).map_err(|e| bad(e.to_string()))?;
                (0..n).map(|_| Theta::scalar(s.sample(rng))).collect()
            }
            ConjugateFamily::GammaPoisson | ConjugateFamily::GammaExponential => {
                let s = GammaSampler::new(h[0], 1.0 / h[1]).map_err(|e| bad(e.to_string()))?;
                (0..n).map(|_| Theta::scalar(s.sample(rng))).collect()
            }
            ConjugateFamily::NormalKnownVar { .. } => {
                let s = NormalSampler::new(h[0], h[1].sqrt()).map_err(|e| bad(e.to_string()))?;
                (0..n).map(|_| Theta::scalar(s.sample(rng))).collect()
            }
            ConjugateFamily::DirichletCategorical { .. } => {
                let gammas = h
                    .iter()
                    .map(|&a| GammaSampler::new(a, 1.0).map_err(|e| bad(e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                (0..n)
                    .map(|_| {
                        let g: Vec<f64> = gammas.iter().map(|s| s.sample(rng)).collect();
                        let total: f64 = g.iter().sum();
                        Theta(g.into_iter().map(|x| x / total).collect())
                    })
                    .collect()
            }
        })
    }

    /// Deterministic `k`-point quadrature of the posterior: equal-probability
    /// bins, each represented by its conditional mean, so the posterior mean
    /// is reproduced exactly. The Dirichlet family uses a product rule over
    /// its stick-breaking Beta factors with about `k` atoms in total.
    pub fn theta_quadrature(&self, k: usize) -> Result<Vec<(Theta, f64)>> {
        if k == 0 {
            return Err(invalid("k_theta", "at least one atom is required"));
        }
        let h = &self.hyper;
        let bad = |e: String| invalid("hyper", e);
        let scalar = |atoms: Vec<f64>| atoms.into_iter().map(|t| (Theta::scalar(t), 1.0 / k as f64)).collect();
        Ok(match self.family {
            ConjugateFamily::BetaBernoulli => scalar(beta_bins(h[0], h[1], k)?),
            ConjugateFamily::GammaPoisson | ConjugateFamily::GammaExponential => {
                let (m, d) = (h[0], h[1]);
                let law = Gamma::new(m, d).map_err(|e| bad(e.to_string()))?;
                let cuts = bin_edges(k, |p| law.inverse_cdf(p));
                scalar(
                    cuts.windows(2)
                        .map(|c| {
                            let upper = |x: f64| if x.is_infinite() { 1.0 } else { gamma_lr(m + 1.0, d * x) };
                            let lower = if c[0] <= 0.0 { 0.0 } else { gamma_lr(m + 1.0, d * c[0]) };
                            (m / d) * (upper(c[1]) - lower) * k as f64
                        })
                        .collect(),
                )
            }
            ConjugateFamily::NormalKnownVar { .. } => {
                let sd = h[1].sqrt();
                let std = Normal::standard();
                let cuts = bin_edges(k, |p| std.inverse_cdf(p));
                let phi = |z: f64| if z.is_finite() { (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() } else { 0.0 };
                scalar(
                    cuts.windows(2)
                        .map(|c| h[0] + sd * (phi(c[0]) - phi(c[1])) * k as f64)
                        .collect(),
                )
            }
            ConjugateFamily::DirichletCategorical { k: cats } => {
                let per = ((k as f64).powf(1.0 / (cats - 1) as f64).round() as usize).max(1);
                let mut atoms: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
                let mut rest: f64 = h.iter().sum();
                for j in 0..cats - 1 {
                    rest -= h[j];
                    let sticks = beta_bins(h[j], rest, per)?;
                    let mut next = Vec::with_capacity(atoms.len() * per);
                    for (prefix, w) in &atoms {
                        let used: f64 = prefix.iter().sum();
                        for &b in &sticks {
                            let mut p = prefix.clone();
                            p.push((1.0 - used) * b);
                            next.push((p, w / per as f64));
                        }
                    }
                    atoms = next;
                }
                atoms
                    .into_iter()
                    .map(|(mut p, w)| {
                        let used: f64 = p.iter().sum();
                        p.push((1.0 - used).max(0.0));
                        (Theta(p), w)
                    })
                    .collect()
            }
        })
    }
}

fn bin_edges(k: usize, inverse: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut cuts = vec![f64::NEG_INFINITY];
    cuts.extend((1..k).map(|j| inverse(j as f64 / k as f64)));
    cuts.push(f64::INFINITY);
    cuts
}

fn beta_bins(a: f64, b: f64, k: usize) -> Result<Vec<f64>> {
    let law = Beta::new(a, b).map_err(|e| invalid("hyper", e.to_string()))?;
    let cuts = bin_edges(k, |p| law.inverse_cdf(p));
    let upper = |x: f64| {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(a + 1.0, b, x)
        }
    };
    Ok(cuts
        .windows(2)
        .map(|c| a / (a + b) * (upper(c[1]) - upper(c[0])) * k as f64)
        .collect())
}

/// Cells of width `step` tiling `[lo, hi]`, each placed at its midpoint with
/// its exact mass.
fn grid_cells(lo: f64, hi: f64, step: f64, cdf: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let width = (hi - lo) / n as f64;
    (0..n)
        .map(|i| {
            let a = lo + i as f64 * width;
            let b = a + width;
            (0.5 * (a + b), cdf(b) - cdf(a))
        })
        .collect()
}
