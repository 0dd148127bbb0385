//! Experiment harness: rollouts, baselines and the three studies.

pub mod csv;
pub mod grid_error;
pub mod inventory;
pub mod spread;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bayes::ConjugateFamily;
use crate::dp::{snap, BeliefSpace, FiniteSolution, Model, Table};
use crate::error::{invalid, Result};
use crate::seed;

/// A decision rule on the augmented state `(t, s, h)`.
pub trait Policy: Sync {
    fn action(&self, t: usize, s: f64, hyper: &[f64]) -> Result<f64>;
}

/// Always the same action.
pub struct ConstantPolicy(pub f64);

impl Policy for ConstantPolicy {
    fn action(&self, _t: usize, _s: f64, _hyper: &[f64]) -> Result<f64> {
        Ok(self.0)
    }
}

/// Greedy actions of a finite-horizon solution, looked up on the grids it
/// was solved on.
pub struct FinitePolicy {
    pub states: Vec<f64>,
    pub actions: Vec<Vec<f64>>,
    pub solution: FiniteSolution,
    pub space: BeliefSpace,
}

impl Policy for FinitePolicy {
    fn action(&self, t: usize, s: f64, hyper: &[f64]) -> Result<f64> {
        let (i, _) = snap(&self.states, s)?;
        let node = self.space.layer(t).rep(hyper);
        Ok(self.actions[i][self.solution.action_index(t, i, node)])
    }
}

/// Stationary greedy policy on a single belief layer.
pub struct StationaryPolicy {
    pub states: Vec<f64>,
    pub actions: Vec<Vec<f64>>,
    pub policy: Table<usize>,
    pub space: BeliefSpace,
}

impl Policy for StationaryPolicy {
    fn action(&self, _t: usize, s: f64, hyper: &[f64]) -> Result<f64> {
        let (i, _) = snap(&self.states, s)?;
        let node = self.space.layer(1).rep(hyper);
        Ok(self.actions[i][*self.policy.get(i, node)])
    }
}

/// The true system a policy is tested on.
pub struct Environment<'a, M> {
    pub model: &'a M,
    pub family: ConjugateFamily,
    pub theta: &'a [f64],
    pub gamma: f64,
    /// Number of decisions; the terminal cost is charged after the last one.
    pub decisions: usize,
    pub s0: f64,
    pub h0: Vec<f64>,
}

/// Discounted cost of one trajectory. Beliefs are updated online.
pub fn rollout<M: Model, P: Policy + ?Sized, R: Rng + ?Sized>(
    env: &Environment<'_, M>,
    policy: &P,
    rng: &mut R,
) -> Result<f64> {
    let (mut s, mut h) = (env.s0, env.h0.clone());
    let (mut total, mut disc) = (0.0, 1.0);
    for t in 1..=env.decisions {
        let a = policy.action(t, s, &h)?;
        let xi = env.family.sample_obs(env.theta, rng)?;
        total += disc * env.model.cost(t, s, a, xi);
        s = env.model.transition(t, s, a, xi);
        h = env.family.successor(&h, xi);
        disc *= env.gamma;
    }
    Ok(total + disc * env.model.terminal(s))
}

/// Expected discounted cost by enumerating every observation path over a
/// finite support.
pub fn exact_expected_cost<M: Model, P: Policy + ?Sized>(
    env: &Environment<'_, M>,
    policy: &P,
    support: &[f64],
) -> Result<f64> {
    let weights = env.family.likelihood_weights(env.theta, support);
    fn go<M: Model, P: Policy + ?Sized>(
        env: &Environment<'_, M>,
        policy: &P,
        support: &[f64],
        weights: &[f64],
        t: usize,
        s: f64,
        h: &[f64],
    ) -> Result<f64> {
        if t > env.decisions {
            return Ok(env.model.terminal(s));
        }
        let a = policy.action(t, s, h)?;
        let mut total = 0.0;
        for (&xi, &w) in support.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let next = env.model.transition(t, s, a, xi);
            let h2 = env.family.successor(h, xi);
            let tail = go(env, policy, support, weights, t + 1, next, &h2)?;
            total += w * (env.model.cost(t, s, a, xi) + env.gamma * tail);
        }
        Ok(total)
    }
    go(env, policy, support, &weights, 1, env.s0, &env.h0)
}

/// Single-pass mean and variance; one sample has variance zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Welford {
    pub n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::default();
        iter.into_iter().for_each(|x| w.push(x));
        w
    }
}

/// `reps` seeded rollouts, aggregated in replication order.
pub fn evaluate_policy<M: Model, P: Policy + ?Sized>(
    env: &Environment<'_, M>,
    policy: &P,
    reps: usize,
    master: u64,
) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(invalid("reps", "at least one rollout"));
    }
    let costs = (0..reps)
        .into_par_iter()
        .map(|r| rollout(env, policy, &mut seed::rng(master, &[r as u64])))
        .collect::<Result<Vec<f64>>>()?;
    let w: Welford = costs.into_iter().collect();
    Ok((w.mean(), w.variance()))
}

/// One fitted model tested once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub model: String,
    /// History size, or episode index for checkpointed studies.
    pub index: usize,
    pub replication: usize,
    pub loss: f64,
    pub cpu_seconds: f64,
    pub seed: u64,
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Linear-interpolation sample quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn iqr(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}

pub fn median_of(values: &[f64]) -> f64 {
    median(&mut values.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::FnModel;

    fn coin() -> FnModel<impl Fn(usize, f64, f64, f64) -> f64, impl Fn(usize, f64, f64, f64) -> f64, impl Fn(f64) -> f64> {
        FnModel {
            cost: |_t: usize, _s: f64, a: f64, xi: f64| if xi == 1.0 { -a } else { a },
            transition: |_t: usize, s: f64, a: f64, xi: f64| if xi == 1.0 { s + a } else { s - a },
            terminal: |_s: f64| 0.0,
        }
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 7.5, 3.0];
        let w: Welford = xs.iter().cloned().collect();
        let m = xs.iter().sum::<f64>() / 5.0;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 4.0;
        assert!((w.mean() - m).abs() < 1e-12);
        assert!((w.variance() - v).abs() < 1e-12);
        let one: Welford = [3.0].into_iter().collect();
        assert_eq!(one.variance(), 0.0);
    }

    #[test]
    fn zero_policy_has_no_cost() {
        let model = coin();
        let env = Environment {
            model: &model,
            family: ConjugateFamily::BetaBernoulli,
            theta: &[0.6],
            gamma: 1.0,
            decisions: 7,
            s0: 80.0,
            h0: vec![1.0, 1.0],
        };
        assert_eq!(evaluate_policy(&env, &ConstantPolicy(0.0), 50, 1).unwrap(), (0.0, 0.0));
        assert_eq!(evaluate_policy(&env, &ConstantPolicy(1.0), 1, 1).unwrap().1, 0.0);
        assert!((exact_expected_cost(&env, &ConstantPolicy(1.0), &[0.0, 1.0]).unwrap() + 7.0 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn evaluation_is_seeded() {
        let model = coin();
        let env = Environment {
            model: &model,
            family: ConjugateFamily::BetaBernoulli,
            theta: &[0.6],
            gamma: 0.9,
            decisions: 5,
            s0: 0.0,
            h0: vec![1.0, 1.0],
        };
        let a = evaluate_policy(&env, &ConstantPolicy(2.0), 200, 4).unwrap();
        assert_eq!(a, evaluate_policy(&env, &ConstantPolicy(2.0), 200, 4).unwrap());
        let exact = exact_expected_cost(&env, &ConstantPolicy(2.0), &[0.0, 1.0]).unwrap();
        assert!((a.0 - exact).abs() < 4.0 * (a.1 / 200.0).sqrt());
    }

    #[test]
    fn quantiles() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(median_of(&v), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(iqr(&v), 2.0);
        assert_eq!(median_of(&[1.0, 2.0]), 1.5);
    }
}
