//! Infinite-horizon value iteration on a stationary belief space.

use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::dp::{check_space, sweep, validate_grid, BeliefSpace, Kernel, Model, Table};
use crate::error::{invalid, Error, Result};
use crate::risk::{evaluate, BcrSpec, DiscreteDist, RiskSpec};

pub struct StationaryProblem<M> {
    pub model: M,
    pub states: Vec<f64>,
    pub actions: Vec<Vec<f64>>,
    pub gamma: f64,
    pub risk: BcrSpec,
    pub support: Vec<f64>,
}

impl<M: Model> StationaryProblem<M> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("gamma", format!("{} outside (0,1)", self.gamma)));
        }
        validate_grid(&self.states, &self.actions, &self.support)?;
        self.risk.validate()
    }

    /// `max |C(s,a,xi)|` over the grids.
    pub fn cost_bound(&self) -> f64 {
        let mut bound: f64 = 0.0;
        for (i, &s) in self.states.iter().enumerate() {
            for &a in &self.actions[i] {
                for &xi in &self.support {
                    bound = bound.max(self.model.cost(0, s, a, xi).abs());
                }
            }
        }
        bound
    }
}

/// Stopping threshold `eps (1 - gamma) / (2 gamma)` on successive iterates.
pub fn stop_threshold(eps: f64, gamma: f64) -> f64 {
    eps * (1.0 - gamma) / (2.0 * gamma)
}

#[derive(Debug, Clone)]
pub struct ViResult {
    pub values: Table<f64>,
    pub policy: Table<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// `||V_i - V_{i-1}||` at exit.
    pub residual: f64,
}

/// Bellman operators of one stationary problem with its transition kernel
/// precomputed.
pub struct Operator<'a> {
    kernel: Kernel,
    risk: &'a BcrSpec,
    gamma: f64,
    space: &'a BeliefSpace,
    n_states: usize,
}

impl<'a> Operator<'a> {
    pub fn new<M: Model>(problem: &'a StationaryProblem<M>, space: &'a BeliefSpace) -> Result<Self> {
        problem.validate()?;
        check_space(space, &problem.support)?;
        if space.layers.len() != 1 {
            return Err(Error::DomainMismatch("value iteration needs a single stationary layer".into()));
        }
        Ok(Self {
            kernel: Kernel::build(&problem.model, 0, &problem.states, &problem.actions, &problem.support)?,
            risk: &problem.risk,
            gamma: problem.gamma,
            space,
            n_states: problem.states.len(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.space.layers[0].len()
    }

    pub fn zeros(&self) -> Table<f64> {
        Table::filled(self.n_states, self.n_nodes(), 0.0)
    }

    pub fn max_snap(&self) -> f64 {
        self.kernel.max_snap
    }

    /// `(T V, greedy policy)`.
    pub fn apply(&self, v: &Table<f64>) -> (Table<f64>, Table<usize>) {
        sweep(&self.kernel, self.risk, self.gamma, &self.space.layers[0], v, None)
    }

    /// `T^pi V`.
    pub fn apply_policy(&self, v: &Table<f64>, policy: &Table<usize>) -> Table<f64> {
        sweep(&self.kernel, self.risk, self.gamma, &self.space.layers[0], v, Some(policy)).0
    }

    /// Iterates `T` from `start` until successive iterates differ by less
    /// than the stopping threshold or `i_max` sweeps have run. The returned
    /// policy is greedy with respect to the returned values.
    pub fn value_iterate_from(&self, start: Table<f64>, eps: f64, i_max: usize) -> Result<ViResult> {
        check_eps(eps)?;
        let tol = stop_threshold(eps, self.gamma);
        let mut v = start;
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        while iterations < i_max {
            let (next, _) = self.apply(&v);
            residual = next.sup_distance(&v);
            v = next;
            iterations += 1;
            if residual < tol {
                break;
            }
        }
        let (_, policy) = self.apply(&v);
        Ok(ViResult {
            values: v,
            policy,
            iterations,
            converged: residual < tol,
            residual,
        })
    }

    pub fn value_iterate(&self, eps: f64, i_max: usize) -> Result<ViResult> {
        self.value_iterate_from(self.zeros(), eps, i_max)
    }

    /// Fixed point of `T^pi` to the same stopping rule.
    pub fn policy_value(&self, policy: &Table<usize>, eps: f64, i_max: usize) -> Result<ViResult> {
        check_eps(eps)?;
        let tol = stop_threshold(eps, self.gamma);
        let mut v = self.zeros();
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        while iterations < i_max {
            let next = self.apply_policy(&v, policy);
            residual = next.sup_distance(&v);
            v = next;
            iterations += 1;
            if residual < tol {
                break;
            }
        }
        Ok(ViResult {
            values: v,
            policy: policy.clone(),
            iterations,
            converged: residual < tol,
            residual,
        })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 {
        Ok(())
    } else {
        Err(invalid("eps", format!("{eps} must be positive")))
    }
}

pub fn bellman_op<M: Model>(problem: &StationaryProblem<M>, v: &Table<f64>, space: &BeliefSpace) -> Result<Table<f64>> {
    Ok(Operator::new(problem, space)?.apply(v).0)
}

pub fn value_iterate<M: Model>(problem: &StationaryProblem<M>, eps: f64, i_max: usize, space: &BeliefSpace) -> Result<ViResult> {
    Operator::new(problem, space)?.value_iterate(eps, i_max)
}

pub fn policy_value<M: Model>(
    problem: &StationaryProblem<M>,
    policy: &Table<usize>,
    eps: f64,
    i_max: usize,
    space: &BeliefSpace,
) -> Result<ViResult> {
    Operator::new(problem, space)?.policy_value(policy, eps, i_max)
}

/// `sup |V_a - V_b|`; a single-column `V_b` is broadcast over nodes.
pub fn sup_gap(a: &Table<f64>, b: &Table<f64>) -> Result<f64> {
    if a.n_states() != b.n_states() || (b.n_nodes() != 1 && b.n_nodes() != a.n_nodes()) {
        return Err(Error::DomainMismatch(format!(
            "{}x{} table against {}x{}",
            a.n_states(),
            a.n_nodes(),
            b.n_states(),
            b.n_nodes()
        )));
    }
    let mut gap: f64 = 0.0;
    for s in 0..a.n_states() {
        for n in 0..a.n_nodes() {
            let other = *b.get(s, if b.n_nodes() == 1 { 0 } else { n });
            gap = gap.max((a.get(s, n) - other).abs());
        }
    }
    Ok(gap)
}

/// Inventory cost data for the base-stock closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseStockParams {
    pub order_cost: f64,
    pub penalty: f64,
    pub holding: f64,
    pub gamma: f64,
    /// Poisson demand mean.
    pub demand_mean: f64,
    /// Largest demand kept; the pmf is renormalized on `0..=demand_max`.
    pub demand_max: usize,
}

impl BaseStockParams {
    /// `(p - (1 - gamma) o) / (p + h)`.
    pub fn kappa(&self) -> f64 {
        (self.penalty - (1.0 - self.gamma) * self.order_cost) / (self.penalty + self.holding)
    }

    fn check(&self) -> Result<f64> {
        let k = self.kappa();
        if !(k > 0.0 && k < 1.0) || self.order_cost < 0.0 || self.holding < 0.0 || self.penalty < 0.0 {
            return Err(invalid("base_stock", format!("kappa = {k} outside (0,1)")));
        }
        Ok(k)
    }

    pub fn demand(&self) -> Result<DiscreteDist> {
        let law = Poisson::new(self.demand_mean).map_err(|e| invalid("demand_mean", e.to_string()))?;
        let mut prev = 0.0;
        let atoms: Vec<(f64, f64)> = (0..=self.demand_max as u64)
            .map(|k| {
                let c = law.cdf(k);
                let w = c - prev;
                prev = c;
                (k as f64, w)
            })
            .collect();
        DiscreteDist::normalized(atoms)
    }

    /// `min { s : H(s) >= kappa }` for the truncated demand cdf.
    pub fn s_star(&self) -> Result<f64> {
        let k = self.check()?;
        let d = self.demand()?;
        Ok(d.quantile(k))
    }

    /// `c(y, z) = p (z - y)^+ + h (y - z)^+`.
    pub fn shortage_holding(&self, y: f64, z: f64) -> f64 {
        self.penalty * (z - y).max(0.0) + self.holding * (y - z).max(0.0)
    }

    /// `-o s + o s* + rho[gamma o xi + c(s*, xi)] / (1 - gamma)` for `s <= s*`.
    pub fn value(&self, risk: &RiskSpec, s: f64) -> Result<f64> {
        let star = self.s_star()?;
        if s > star {
            return Err(invalid("s", format!("{s} above the base-stock level {star}")));
        }
        let d = self.demand()?;
        let stage = d.map_values(|xi| self.gamma * self.order_cost * xi + self.shortage_holding(star, xi));
        Ok(-self.order_cost * s + self.order_cost * star + evaluate(&stage, risk) / (1.0 - self.gamma))
    }
}
