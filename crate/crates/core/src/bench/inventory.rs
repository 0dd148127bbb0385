//! Infinite-horizon inventory control with Poisson demand.
//!
//! Inventory is backlogged down to `state_min`, where it is clamped; orders
//! are capped so that `s + a <= state_max`. Demand is truncated to
//! `0..=demand_max` and renormalized.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::csv::{fmt_float, Table as Csv};
use super::{evaluate_policy, Environment, StationaryPolicy};
use crate::bayes::{Belief, ConjugateFamily, Theta};
use crate::dp::{BeliefSpace, Model, Table};
use crate::error::{invalid, Result};
use crate::grid::{build_grids, GridLevel, GridNode, GridParams};
use crate::risk::{BcrSpec, RiskSpec};
use crate::seed;
use crate::vi::{sup_gap, BaseStockParams, Operator, StationaryProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InventoryModelKind {
    BcrExpExp,
    BcrVarExp,
    BcrAvarAvar,
    Standard,
    RiskAverse,
}

impl InventoryModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            InventoryModelKind::BcrExpExp => "bcr_exp_exp",
            InventoryModelKind::BcrVarExp => "bcr_var_exp",
            InventoryModelKind::BcrAvarAvar => "bcr_avar_avar",
            InventoryModelKind::Standard => "standard",
            InventoryModelKind::RiskAverse => "risk_averse",
        }
    }

    pub fn is_bayesian(self) -> bool {
        matches!(
            self,
            InventoryModelKind::BcrExpExp | InventoryModelKind::BcrVarExp | InventoryModelKind::BcrAvarAvar
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InventoryConfig {
    pub order_cost: f64,
    pub holding: f64,
    pub penalty: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub theta_c: f64,
    pub prior: (f64, f64),
    /// Beliefs are point masses at `theta_c` instead of learning.
    pub dirac_prior: bool,
    pub state_min: i64,
    pub state_max: i64,
    pub demand_max: usize,
    pub grid: GridParams,
    /// Grid levels unioned into the stationary belief layer.
    pub levels: usize,
    pub k_theta: usize,
    pub vi_eps: f64,
    pub vi_max_iter: usize,
    pub checkpoints: Vec<usize>,
    pub replications: usize,
    pub variants: Vec<InventoryModelKind>,
    pub seed: u64,
    /// True demand means for the policy comparison; empty skips it.
    pub theta_grid: Vec<f64>,
    pub perf_models: Vec<InventoryModelKind>,
    pub perf_history: usize,
    pub perf_horizon: usize,
    pub perf_replications: usize,
    pub perf_rollouts: usize,
}

impl Default for InventoryConfig {
    fn default() -> Self {
        Self {
            order_cost: 2.0,
            holding: 4.0,
            penalty: 6.0,
            gamma: 0.8,
            alpha: 0.6,
            beta: 0.4,
            theta_c: 10.0,
            prior: (1.0, 1.0),
            dirac_prior: false,
            state_min: -15,
            state_max: 25,
            demand_max: 25,
            grid: GridParams {
                radius: 20.0,
                eps: 2.5,
                m_max: 10,
                max_passes: 4,
            },
            levels: 4,
            k_theta: 16,
            vi_eps: 0.1,
            vi_max_iter: 2000,
            checkpoints: vec![1, 10, 50, 100],
            replications: 20,
            variants: vec![InventoryModelKind::BcrVarExp, InventoryModelKind::BcrAvarAvar],
            seed: 0,
            theta_grid: vec![6.0, 8.0, 10.0, 12.0, 14.0],
            perf_models: vec![
                InventoryModelKind::BcrExpExp,
                InventoryModelKind::BcrVarExp,
                InventoryModelKind::BcrAvarAvar,
                InventoryModelKind::Standard,
                InventoryModelKind::RiskAverse,
            ],
            perf_history: 5,
            perf_horizon: 30,
            perf_replications: 5,
            perf_rollouts: 50,
        }
    }
}

impl InventoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("gamma", format!("{} outside (0,1)", self.gamma)));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(name, format!("{v} outside (0,1]")));
            }
        }
        if self.order_cost < 0.0 || self.holding < 0.0 || self.penalty < 0.0 {
            return Err(invalid("order_cost", "costs must be non-negative"));
        }
        if !(self.theta_c > 0.0) || !(self.prior.0 > 0.0 && self.prior.1 > 0.0) {
            return Err(invalid("theta_c", "demand mean and prior must be positive"));
        }
        if self.state_min >= self.state_max || self.state_min > 0 {
            return Err(invalid("state_min", "need state_min <= 0 < state_max"));
        }
        if self.state_max - self.state_min < self.demand_max as i64 {
            return Err(invalid("demand_max", "demand range wider than the state grid"));
        }
        let k = self.base_stock(self.theta_c).kappa();
        if !(k > 0.0 && k < 1.0) {
            return Err(invalid("penalty", format!("kappa = {k} outside (0,1)")));
        }
        self.grid.validate()?;
        if self.levels == 0 || self.k_theta == 0 || self.vi_max_iter == 0 || !(self.vi_eps > 0.0) {
            return Err(invalid("levels", "grid levels, quadrature and iteration limits must be positive"));
        }
        if self.checkpoints.is_empty() || self.checkpoints.contains(&0) || self.replications == 0 {
            return Err(invalid("checkpoints", "need positive checkpoints and replications"));
        }
        if self.theta_grid.iter().any(|&t| !(t > 0.0)) {
            return Err(invalid("theta_grid", "demand means must be positive"));
        }
        if !self.theta_grid.is_empty()
            && (self.perf_history == 0 || self.perf_horizon == 0 || self.perf_replications == 0 || self.perf_rollouts == 0)
        {
            return Err(invalid("perf_history", "comparison sizes must be positive"));
        }
        Ok(())
    }

    pub fn base_stock(&self, theta: f64) -> BaseStockParams {
        BaseStockParams {
            order_cost: self.order_cost,
            penalty: self.penalty,
            holding: self.holding,
            gamma: self.gamma,
            demand_mean: theta,
            demand_max: self.demand_max,
        }
    }

    pub fn risk(&self, kind: InventoryModelKind) -> BcrSpec {
        let (outer, inner) = match kind {
            InventoryModelKind::BcrExpExp | InventoryModelKind::Standard => (RiskSpec::Expectation, RiskSpec::Expectation),
            InventoryModelKind::BcrVarExp => (RiskSpec::var(self.alpha), RiskSpec::Expectation),
            InventoryModelKind::BcrAvarAvar => (RiskSpec::avar(self.alpha), RiskSpec::avar(self.beta)),
            InventoryModelKind::RiskAverse => (RiskSpec::Expectation, RiskSpec::avar(self.beta)),
        };
        BcrSpec { outer, inner }
    }

    pub fn states(&self) -> Vec<f64> {
        (self.state_min..=self.state_max).map(|s| s as f64).collect()
    }

    pub fn support(&self) -> Vec<f64> {
        (0..=self.demand_max).map(|x| x as f64).collect()
    }

    /// The stationary problem under composite risk `risk`.
    pub fn problem(&self, risk: BcrSpec) -> StationaryProblem<InventoryModel> {
        let states = self.states();
        let actions = states
            .iter()
            .map(|&s| (0..=(self.state_max - s as i64)).map(|a| a as f64).collect())
            .collect();
        StationaryProblem {
            model: InventoryModel {
                order_cost: self.order_cost,
                holding: self.holding,
                penalty: self.penalty,
                state_min: self.state_min as f64,
            },
            states,
            actions,
            gamma: self.gamma,
            risk,
            support: self.support(),
        }
    }

    /// Stationary belief layer: the union of the grid levels rooted at `h`.
    /// Node 0 is `h` itself.
    pub fn belief_space(&self, hyper: &[f64]) -> Result<BeliefSpace> {
        let root = Belief::new(ConjugateFamily::GammaPoisson, hyper.to_vec())?;
        let levels = build_grids(&root, self.levels, &self.grid)?;
        let mut nodes: Vec<GridNode> = Vec::new();
        for level in &levels {
            for n in &level.nodes {
                if !nodes.iter().any(|m| m.hyper == n.hyper) {
                    nodes.push(n.clone());
                }
            }
        }
        let union = GridLevel { stage: 1, nodes };
        BeliefSpace::stationary(ConjugateFamily::GammaPoisson, &union, &self.support(), self.k_theta)
    }

    pub fn dirac_space(&self, theta: f64) -> Result<BeliefSpace> {
        BeliefSpace::dirac(ConjugateFamily::GammaPoisson, Theta::scalar(theta), &self.support())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InventoryModel {
    pub order_cost: f64,
    pub holding: f64,
    pub penalty: f64,
    pub state_min: f64,
}

impl Model for InventoryModel {
    fn cost(&self, _t: usize, s: f64, a: f64, xi: f64) -> f64 {
        let y = s + a;
        self.order_cost * a + self.penalty * (xi - y).max(0.0) + self.holding * (y - xi).max(0.0)
    }
    fn transition(&self, _t: usize, s: f64, a: f64, xi: f64) -> f64 {
        (s + a - xi).max(self.state_min)
    }
}

/// Converged values and greedy policy on one belief space.
pub struct Solved {
    pub values: Table<f64>,
    pub policy: Table<usize>,
    pub space: BeliefSpace,
    pub iterations: usize,
}

pub fn solve(cfg: &InventoryConfig, kind: InventoryModelKind, space: BeliefSpace) -> Result<Solved> {
    let problem = cfg.problem(cfg.risk(kind));
    let res = Operator::new(&problem, &space)?.value_iterate(cfg.vi_eps, cfg.vi_max_iter)?;
    Ok(Solved {
        values: res.values,
        policy: res.policy,
        space,
        iterations: res.iterations,
    })
}

/// `V*(., mu_h)` as a single-column table.
pub fn value_at(cfg: &InventoryConfig, kind: InventoryModelKind, hyper: &[f64]) -> Result<Table<f64>> {
    let solved = solve(cfg, kind, cfg.belief_space(hyper)?)?;
    let n = cfg.states().len();
    Ok(Table::from_fn(n, 1, |s, _| *solved.values.get(s, 0)))
}

/// `V*(., delta_theta)` with the variant's inner risk measure.
pub fn reference_value(cfg: &InventoryConfig, kind: InventoryModelKind, theta: f64) -> Result<Table<f64>> {
    Ok(solve(cfg, kind, cfg.dirac_space(theta)?)?.values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub variant: InventoryModelKind,
    pub t: usize,
    pub replication: usize,
    pub sup_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfRow {
    pub model: InventoryModelKind,
    pub theta_c: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InventoryReport {
    pub gaps: Vec<GapRow>,
    pub perf: Vec<PerfRow>,
}

impl InventoryReport {
    pub fn gaps_for(&self, variant: InventoryModelKind, t: usize) -> Vec<f64> {
        self.gaps
            .iter()
            .filter(|g| g.variant == variant && g.t == t)
            .map(|g| g.sup_gap)
            .collect()
    }

    pub fn gap_csv(&self) -> Csv {
        let mut t = Csv::new(&["variant", "t", "replication", "sup_gap"]);
        for g in &self.gaps {
            t.push(vec![g.variant.tag().into(), g.t.to_string(), g.replication.to_string(), fmt_float(g.sup_gap)]);
        }
        t
    }

    pub fn perf_csv(&self) -> Csv {
        let mut t = Csv::new(&["model", "theta_c", "mean", "variance"]);
        for r in &self.perf {
            t.push(vec![r.model.tag().into(), fmt_float(r.theta_c), fmt_float(r.mean), fmt_float(r.variance)]);
        }
        t
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.gap_csv().write(&dir.join("inventory_gap.csv"))?;
        if !self.perf.is_empty() {
            self.perf_csv().write(&dir.join("inventory_perf.csv"))?;
        }
        Ok(())
    }
}

/// Hyper-parameters `h_t = h_1 + sum_{j<t} H(xi_j)` at each checkpoint `t`
/// for one demand stream; `h_1` is the prior.
pub fn belief_path(cfg: &InventoryConfig, rep: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let fam = ConjugateFamily::GammaPoisson;
    let mut rng = seed::rng(cfg.seed, &[0, rep as u64]);
    let last = *cfg.checkpoints.iter().max().unwrap();
    let mut h = vec![cfg.prior.0, cfg.prior.1];
    let mut out = Vec::new();
    for t in 1..=last {
        if cfg.checkpoints.contains(&t) {
            out.push((t, h.clone()));
        }
        h = fam.successor(&h, fam.sample_obs(&[cfg.theta_c], &mut rng)?);
    }
    Ok(out)
}

pub fn run_inventory(cfg: &InventoryConfig) -> Result<InventoryReport> {
    cfg.validate()?;
    let mut gaps = Vec::new();
    for &variant in &cfg.variants {
        let reference = reference_value(cfg, variant, cfg.theta_c)?;
        let cache: Mutex<HashMap<Vec<u64>, f64>> = Mutex::new(HashMap::new());
        let rows: Vec<Vec<GapRow>> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                belief_path(cfg, rep)?
                    .into_iter()
                    .map(|(t, h)| {
                        let key: Vec<u64> = h.iter().map(|x| x.to_bits()).collect();
                        let hit = cache.lock().unwrap().get(&key).copied();
                        let gap = match hit {
                            Some(g) => g,
                            None => {
                                let v = if cfg.dirac_prior {
                                    reference_value(cfg, variant, cfg.theta_c)?
                                } else {
                                    value_at(cfg, variant, &h)?
                                };
                                let g = sup_gap(&reference, &v)?;
                                cache.lock().unwrap().insert(key, g);
                                g
                            }
                        };
                        Ok(GapRow {
                            variant,
                            t,
                            replication: rep,
                            sup_gap: gap,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut rows: Vec<GapRow> = rows.into_iter().flatten().collect();
        rows.sort_by_key(|r| (r.t, r.replication));
        gaps.extend(rows);
    }
    let perf = run_comparison(cfg)?;
    Ok(InventoryReport { gaps, perf })
}

/// Policies fitted on a short demand history and deployed against several
/// true demand means, from empty stock, with online belief updates.
fn run_comparison(cfg: &InventoryConfig) -> Result<Vec<PerfRow>> {
    let fam = ConjugateFamily::GammaPoisson;
    let problem = cfg.problem(BcrSpec::expectation());
    let mut out = Vec::new();
    for (ti, &theta) in cfg.theta_grid.iter().enumerate() {
        for &kind in &cfg.perf_models {
            let costs = (0..cfg.perf_replications)
                .into_par_iter()
                .map(|rep| {
                    let path = [1, ti as u64, rep as u64];
                    let mut rng = seed::rng(cfg.seed, &path);
                    let history = (0..cfg.perf_history)
                        .map(|_| fam.sample_obs(&[theta], &mut rng))
                        .collect::<Result<Vec<f64>>>()?;
                    let posterior = Belief::new(fam, vec![cfg.prior.0, cfg.prior.1])?.update_batch(&history)?;
                    let space = if kind.is_bayesian() {
                        cfg.belief_space(posterior.hyper())?
                    } else {
                        let mle = fam.mle(&history)?.value().max(1e-3);
                        cfg.dirac_space(mle)?
                    };
                    let solved = solve(cfg, kind, space)?;
                    let policy = StationaryPolicy {
                        states: problem.states.clone(),
                        actions: problem.actions.clone(),
                        policy: solved.policy,
                        space: solved.space,
                    };
                    let env = Environment {
                        model: &problem.model,
                        family: fam,
                        theta: &[theta],
                        gamma: cfg.gamma,
                        decisions: cfg.perf_horizon,
                        s0: 0.0,
                        h0: posterior.hyper().to_vec(),
                    };
                    let seed = seed::derive(cfg.seed, &[2, ti as u64, rep as u64]);
                    Ok(evaluate_policy(&env, &policy, cfg.perf_rollouts, seed)?.0)
                })
                .collect::<Result<Vec<f64>>>()?;
            let w: super::Welford = costs.into_iter().collect();
            out.push(PerfRow {
                model: kind,
                theta_c: theta,
                mean: w.mean(),
                variance: w.variance(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast() -> InventoryConfig {
        InventoryConfig {
            state_min: -10,
            state_max: 20,
            demand_max: 20,
            theta_c: 6.0,
            levels: 2,
            k_theta: 6,
            vi_eps: 0.5,
            checkpoints: vec![1, 5],
            replications: 2,
            theta_grid: Vec::new(),
            ..InventoryConfig::default()
        }
    }

    #[test]
    fn dirac_prior_has_no_gap() {
        let cfg = InventoryConfig {
            dirac_prior: true,
            variants: vec![InventoryModelKind::BcrVarExp],
            ..fast()
        };
        let report = run_inventory(&cfg).unwrap();
        assert_eq!(report.gaps.len(), 4);
        assert!(report.gaps.iter().all(|g| g.sup_gap == 0.0));
        assert!(report.gap_csv().render().starts_with("variant,t,replication,sup_gap\n"));
    }

    #[test]
    fn dirac_values_follow_base_stock() {
        let cfg = fast();
        let v = reference_value(&cfg, InventoryModelKind::Standard, cfg.theta_c).unwrap();
        let bs = cfg.base_stock(cfg.theta_c);
        let star = bs.s_star().unwrap();
        for (i, s) in cfg.states().into_iter().enumerate() {
            if s <= star {
                let exact = bs.value(&RiskSpec::Expectation, s).unwrap();
                assert!((v.get(i, 0) - exact).abs() <= cfg.vi_eps, "s = {s}");
            }
        }
    }

    #[test]
    fn learning_gap_is_finite_and_belief_root_is_first() {
        let cfg = InventoryConfig {
            variants: vec![InventoryModelKind::BcrExpExp],
            replications: 1,
            ..fast()
        };
        let space = cfg.belief_space(&[3.0, 2.0]).unwrap();
        assert_eq!(space.layers[0].nodes[0].hyper.as_deref(), Some(&[3.0, 2.0][..]));
        let report = run_inventory(&cfg).unwrap();
        assert!(report.gaps.iter().all(|g| g.sup_gap.is_finite() && g.sup_gap >= 0.0));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(InventoryConfig { gamma: 1.0, ..fast() }.validate().is_err());
        assert!(InventoryConfig { penalty: 0.1, ..fast() }.validate().is_err());
        assert!(InventoryConfig { alpha: 1.2, ..fast() }.validate().is_err());
        assert!(fast().validate().is_ok());
    }
}
