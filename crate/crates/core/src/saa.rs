//! Sample average approximation of single-step composite minimizations over
//! a finite action set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{Belief, Theta};
use crate::dp::Model;
use crate::error::{invalid, Result};
use crate::risk::{avar, DiscreteDist};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaaConfig {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_beta() -> f64 {
    1.0
}

impl SaaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "at least one theta sample"));
        }
        if self.m == 0 {
            return Err(invalid("m", "at least one xi sample"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("{} outside (0,1)", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid("beta", format!("{} outside (0,1]", self.beta)));
        }
        Ok(())
    }

    /// `floor(alpha N)`, the number of discarded samples.
    pub fn discarded(&self) -> usize {
        discarded(self.n, self.alpha)
    }
}

fn discarded(n: usize, alpha: f64) -> usize {
    ((alpha * n as f64) + 1e-12).floor() as usize
}

/// One decision step: state, belief, actions and a continuation value.
pub struct StepContext<'a, M> {
    pub model: &'a M,
    pub t: usize,
    pub state: f64,
    pub belief: &'a Belief,
    pub actions: &'a [f64],
    pub gamma: f64,
    /// `V(s', h')` at the next state and the exact next hyper-parameters.
    pub continuation: &'a (dyn Fn(f64, &[f64]) -> f64 + Sync),
}

/// Sampled parameters and, for each, its observation draws.
#[derive(Debug, Clone)]
pub struct Scenarios {
    pub thetas: Vec<Theta>,
    pub xi: Vec<Vec<f64>>,
}

impl Scenarios {
    /// `theta_i` and `xi^{i,.}` come from streams derived from `(seed, i)`,
    /// so the draws do not depend on scheduling.
    pub fn draw(belief: &Belief, cfg: &SaaConfig) -> Result<Self> {
        cfg.validate()?;
        let family = belief.family();
        let rows: Vec<(Theta, Vec<f64>)> = (0..cfg.n)
            .into_par_iter()
            .map(|i| {
                let theta = belief.sample_theta(1, &mut seed::rng(cfg.seed, &[0, i as u64]))?.remove(0);
                let mut rng = seed::rng(cfg.seed, &[1, i as u64]);
                let xi = (0..cfg.m)
                    .map(|_| family.sample_obs(theta.as_slice(), &mut rng))
                    .collect::<Result<Vec<f64>>>()?;
                Ok((theta, xi))
            })
            .collect::<Result<_>>()?;
        let (thetas, xi) = rows.into_iter().unzip();
        Ok(Self { thetas, xi })
    }

    /// `x[a][i][j] = C(s, a, xi_ij) + gamma V(s', h + H(xi_ij))`.
    pub fn outcomes<M: Model>(&self, ctx: &StepContext<'_, M>) -> Vec<Vec<Vec<f64>>> {
        let family = ctx.belief.family();
        let hyper = ctx.belief.hyper();
        let next_hyper: Vec<Vec<Vec<f64>>> = self
            .xi
            .iter()
            .map(|row| row.iter().map(|&x| family.successor(hyper, x)).collect())
            .collect();
        ctx.actions
            .par_iter()
            .map(|&a| {
                self.xi
                    .iter()
                    .zip(&next_hyper)
                    .map(|(row, hs)| {
                        row.iter()
                            .zip(hs)
                            .map(|(&x, h)| {
                                let next = ctx.model.transition(ctx.t, ctx.state, a, x);
                                ctx.model.cost(ctx.t, ctx.state, a, x) + ctx.gamma * (ctx.continuation)(next, h)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaaSolution {
    pub action_index: usize,
    pub action: f64,
    pub value: f64,
    /// Objective at every action.
    pub values: Vec<f64>,
}

fn argmin(actions: &[f64], values: Vec<f64>) -> SaaSolution {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    SaaSolution {
        action_index: best,
        action: actions[best],
        value: values[best],
        values,
    }
}

/// The `(N - floor(alpha N))`-th smallest of `f`.
pub fn order_statistic(f: &[f64], alpha: f64) -> f64 {
    let mut sorted = f.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[f.len() - 1 - discarded(f.len(), alpha)]
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// VaR-expectation objective from sampled outcomes `x[i][j]`.
pub fn var_expectation_value(x: &[Vec<f64>], alpha: f64) -> f64 {
    let f: Vec<f64> = x.iter().map(|row| mean(row)).collect();
    order_statistic(&f, alpha)
}

/// AVaR-AVaR objective from sampled outcomes `x[i][j]`.
pub fn avar_avar_value(x: &[Vec<f64>], alpha: f64, beta: f64) -> Result<f64> {
    let inner = x
        .iter()
        .map(|row| Ok(avar(&DiscreteDist::uniform(row)?, beta)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(avar(&DiscreteDist::uniform(&inner)?, alpha))
}

pub fn var_expectation_solve<M: Model>(ctx: &StepContext<'_, M>, cfg: &SaaConfig) -> Result<SaaSolution> {
    let x = Scenarios::draw(ctx.belief, cfg)?.outcomes(ctx);
    Ok(argmin(ctx.actions, x.iter().map(|xa| var_expectation_value(xa, cfg.alpha)).collect()))
}

pub fn avar_avar_solve<M: Model>(ctx: &StepContext<'_, M>, cfg: &SaaConfig) -> Result<SaaSolution> {
    let x = Scenarios::draw(ctx.belief, cfg)?.outcomes(ctx);
    let values = x
        .iter()
        .map(|xa| avar_avar_value(xa, cfg.alpha, cfg.beta))
        .collect::<Result<Vec<f64>>>()?;
    Ok(argmin(ctx.actions, values))
}

/// Sample-size guarantee for the outer problem, with the inner size left
/// symbolic because its constants are problem-specific.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSizeHint {
    pub n0: f64,
    pub m0_formula: &'static str,
}

/// `N0 = (2/iota^2)[log(1/eps) + n log ceil(2LD/eta) + n log ceil(2/iota)]`.
pub fn sample_size_hint(l: f64, d: f64, n: usize, iota: f64, eps_prob: f64, eta: f64) -> Result<SampleSizeHint> {
    for (name, v) in [("L", l), ("D", d), ("iota", iota), ("eps_prob", eps_prob), ("eta", eta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, format!("{v} must be positive")));
        }
    }
    if n == 0 || eps_prob >= 1.0 {
        return Err(invalid("n", "dimension and probability out of range"));
    }
    let n = n as f64;
    let n0 = 2.0 / (iota * iota)
        * ((1.0 / eps_prob).ln() + n * (2.0 * l * d / eta).ceil().ln() + n * (2.0 / iota).ceil().ln());
    Ok(SampleSizeHint {
        n0,
        m0_formula: "M0 = (8 varsigma^2 / delta^2) [log(1 + D^n / upsilon^n) + log(1/eps)]",
    })
}

/// Brute-force references for the sampled programs.
pub mod oracle {
    /// Mixed-integer form solved by enumerating every `z` with
    /// `sum z = floor(alpha N)`; big-M is `max f - min f + 1`.
    pub fn big_m(f: &[Vec<f64>], alpha: f64) -> (usize, f64) {
        let all = f.iter().flatten();
        let hi = all.clone().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = all.cloned().fold(f64::INFINITY, f64::min);
        let u = hi - lo + 1.0;
        let mut best = (0, f64::INFINITY);
        for (a, fa) in f.iter().enumerate() {
            let n = fa.len();
            assert!(n < 32, "enumeration limited to small N");
            let k = super::discarded(n, alpha) as u32;
            for z in 0u32..(1 << n) {
                if z.count_ones() != k {
                    continue;
                }
                let kappa = fa
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v - if z >> i & 1 == 1 { u } else { 0.0 })
                    .fold(f64::NEG_INFINITY, f64::max);
                if kappa < best.1 {
                    best = (a, kappa);
                }
            }
        }
        best
    }

    /// Minimizes a convex piecewise-linear function of one variable on
    /// `[lo, hi]` by grid search, zooming until the spacing is below `tol`.
    pub fn grid_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        let points = 64;
        loop {
            let step = (hi - lo) / points as f64;
            let (mut best_x, mut best) = (lo, f(lo));
            for k in 1..=points {
                let x = lo + step * k as f64;
                let v = f(x);
                if v < best {
                    best = v;
                    best_x = x;
                }
            }
            if step <= tol {
                return best;
            }
            lo = best_x - step;
            hi = best_x + step;
        }
    }

    /// Joint `(u, w)` program for AVaR-AVaR by nested grid minimization.
    pub fn nested_avar_avar(x: &[Vec<f64>], alpha: f64, beta: f64) -> f64 {
        let ru = |values: &[f64], level: f64, w: f64| {
            w + values.iter().map(|v| (v - w).max(0.0)).sum::<f64>() / (level * values.len() as f64)
        };
        let span = |values: &[f64]| {
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo - 1.0, hi + 1.0)
        };
        let inner: Vec<f64> = x
            .iter()
            .map(|row| {
                let (lo, hi) = span(row);
                grid_min(|w| ru(row, beta, w), lo, hi, 1e-6)
            })
            .collect();
        let (lo, hi) = span(&inner);
        grid_min(|u| ru(&inner, alpha, u), lo, hi, 1e-6)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::ConjugateFamily;
    use crate::dp::FnModel;
    use proptest::prelude::*;

    #[test]
    fn order_statistic_examples() {
        let f = [30.0, 10.0, 50.0, 20.0, 40.0];
        assert_eq!(order_statistic(&f, 0.4), 30.0);
        assert_eq!(order_statistic(&f, 0.01), 50.0);
    }

    #[test]
    fn outer_avar_example() {
        let x: Vec<Vec<f64>> = [10.0, 20.0, 30.0, 40.0, 50.0].iter().map(|&v| vec![v]).collect();
        assert!((avar_avar_value(&x, 0.4, 0.5).unwrap() - 45.0).abs() < 1e-12);
    }

    #[test]
    fn unit_beta_is_mean_then_avar() {
        let x = vec![vec![1.0, 5.0, 2.0], vec![0.0, 0.0, 9.0], vec![4.0, 4.0, 4.0]];
        let means: Vec<f64> = x.iter().map(|r| mean(r)).collect();
        let direct = avar(&DiscreteDist::uniform(&means).unwrap(), 0.5);
        assert!((avar_avar_value(&x, 0.5, 1.0).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn sample_size_examples() {
        let h = sample_size_hint(10.0, 1.0, 1, 0.1, 0.05, 1.0).unwrap();
        assert!((h.n0 - 600.0 * 20f64.ln()).abs() < 1e-9);
        assert_eq!(h.n0.round(), 1797.0);
        let h2 = sample_size_hint(10.0, 1.0, 1, 0.1, 0.025, 1.0).unwrap();
        assert!((h2.n0 - h.n0 - 200.0 * 2f64.ln()).abs() < 1e-9);
        assert!(h.m0_formula.contains("varsigma"));
        assert!(sample_size_hint(0.0, 1.0, 1, 0.1, 0.05, 1.0).is_err());
    }

    #[test]
    fn config_checks() {
        let ok = SaaConfig { n: 5, m: 3, alpha: 0.4, beta: 0.5, seed: 1 };
        assert!(ok.validate().is_ok());
        assert_eq!(ok.discarded(), 2);
        assert!(SaaConfig { alpha: 1.0, ..ok }.validate().is_err());
        assert!(SaaConfig { beta: 0.0, ..ok }.validate().is_err());
        assert!(SaaConfig { n: 0, ..ok }.validate().is_err());
    }

    fn toy() -> (impl Model, Belief) {
        let model = FnModel {
            cost: |_t: usize, _s: f64, a: f64, xi: f64| -a * (2.0 * xi - 1.0) + 0.1 * a * a,
            transition: |_t: usize, s: f64, _a: f64, _xi: f64| s,
            terminal: |_s: f64| 0.0,
        };
        (model, Belief::beta(6.0, 4.0).unwrap())
    }

    #[test]
    fn solvers_are_deterministic() {
        let (model, belief) = toy();
        let cont = |_s: f64, h: &[f64]| h[0] / (h[0] + h[1]);
        let actions = [0.0, 1.0, 2.0];
        let ctx = StepContext {
            model: &model,
            t: 1,
            state: 0.0,
            belief: &belief,
            actions: &actions,
            gamma: 0.9,
            continuation: &cont,
        };
        let cfg = SaaConfig { n: 20, m: 30, alpha: 0.3, beta: 0.6, seed: 9 };
        let a = var_expectation_solve(&ctx, &cfg).unwrap();
        assert_eq!(a, var_expectation_solve(&ctx, &cfg).unwrap());
        let b = avar_avar_solve(&ctx, &cfg).unwrap();
        assert_eq!(b, avar_avar_solve(&ctx, &cfg).unwrap());
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.is_finite() && y.is_finite()));
        let other = var_expectation_solve(&ctx, &SaaConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.values, other.values);
    }

    #[test]
    fn sampled_observations_follow_family() {
        let fam = ConjugateFamily::DirichletCategorical { k: 3 };
        let mut rng = seed::rng(3, &[]);
        for _ in 0..100 {
            let x = fam.sample_obs(&[0.2, 0.0, 0.8], &mut rng).unwrap();
            assert!(x == 1.0 || x == 3.0);
        }
    }

    #[test]
    fn nested_oracle_agrees() {
        let x = vec![vec![3.0, -1.0, 2.0], vec![0.5, 4.0, 1.0], vec![-2.0, 0.0, 6.0], vec![1.0, 1.0, 1.0]];
        for (alpha, beta) in [(0.3, 0.5), (0.75, 1.0), (0.1, 0.2)] {
            let exact = avar_avar_value(&x, alpha, beta).unwrap();
            assert!((oracle::nested_avar_avar(&x, alpha, beta) - exact).abs() < 1e-5);
        }
    }

    proptest! {
        #[test]
        fn order_statistic_matches_big_m(
            f in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 1..=8), 1..=3),
            k in 1usize..=9,
        ) {
            let alpha = k as f64 / 10.0;
            let n = f[0].len();
            let f: Vec<Vec<f64>> = f.into_iter().map(|mut r| { r.resize(n, 0.0); r }).collect();
            let values: Vec<f64> = f.iter().map(|fa| order_statistic(fa, alpha)).collect();
            let sol = argmin(&vec![0.0; f.len()], values);
            let (a, kappa) = oracle::big_m(&f, alpha);
            prop_assert_eq!(sol.value, kappa);
            prop_assert_eq!(sol.action_index, a);
        }

        #[test]
        fn kappa_non_increasing_in_alpha(f in prop::collection::vec(-50.0f64..50.0, 1..=20)) {
            let mut prev = f64::INFINITY;
            for k in 1..=9 {
                let v = order_statistic(&f, k as f64 / 10.0);
                prop_assert!(v <= prev);
                prev = v;
            }
        }
    }
}
