//! Finite-horizon spread betting.
//!
//! Market movements are stored as `xi in {0, 1}` for the Beta-Bernoulli
//! belief and mapped to `-1, +1` in the loss `-(1 - tau 1{xi=1}) a xi`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::csv::{fmt_float, Table as Csv};
use super::{exact_expected_cost, rollout, Environment, FinitePolicy, Policy, ReplicationResult, Welford};
use crate::bayes::{Belief, ConjugateFamily, Theta};
use crate::dp::{snap, solve_finite, BeliefSpace, FiniteSolution, Model, ProblemSpec};
use crate::error::{invalid, Result};
use crate::grid::{build_grids, GridParams};
use crate::risk::{BcrSpec, RiskSpec};
use crate::seed;

const SUPPORT: [f64; 2] = [0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BettingModel {
    EpisodicBayes,
    BcrExpExp,
    Standard,
    BcrVarExp,
    BcrAvarExp,
    RiskAverse,
    BcrAvarAvar,
    DistRobust,
}

impl BettingModel {
    pub const ALL: [BettingModel; 8] = [
        BettingModel::EpisodicBayes,
        BettingModel::BcrExpExp,
        BettingModel::Standard,
        BettingModel::BcrVarExp,
        BettingModel::BcrAvarExp,
        BettingModel::RiskAverse,
        BettingModel::BcrAvarAvar,
        BettingModel::DistRobust,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            BettingModel::EpisodicBayes => "episodic_bayes",
            BettingModel::BcrExpExp => "bcr_exp_exp",
            BettingModel::Standard => "standard",
            BettingModel::BcrVarExp => "bcr_var_exp",
            BettingModel::BcrAvarExp => "bcr_avar_exp",
            BettingModel::RiskAverse => "risk_averse",
            BettingModel::BcrAvarAvar => "bcr_avar_avar",
            BettingModel::DistRobust => "dist_robust",
        }
    }
}

/// How a fitted policy is scored against the true market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Performance {
    /// Expected loss under the true parameter, by path enumeration.
    Expected,
    /// Loss along one simulated path.
    Realized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpreadBettingConfig {
    pub initial_wealth: f64,
    pub theta_c: f64,
    /// `T`; bets are placed at stages `1..T`.
    pub horizon: usize,
    pub actions: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub commission: f64,
    pub n_history: Vec<usize>,
    pub replications: usize,
    pub models: Vec<BettingModel>,
    pub seed: u64,
    pub wealth_max: f64,
    pub wealth_step: f64,
    /// Posterior quadrature size per belief node.
    pub k_theta: usize,
    /// Posterior draws forming the robust ambiguity set.
    pub dr_samples: usize,
    /// Adds `theta = 0` and `theta = 1` to the robust ambiguity set.
    pub dr_support_bounds: bool,
    pub performance: Performance,
    /// `(alpha, beta)` pairs for the AVaR-AVaR loss histogram.
    pub hist_levels: Vec<(f64, f64)>,
    pub hist_n_history: usize,
    /// Records solve times; off gives byte-identical output across runs.
    pub timing: bool,
}

impl Default for SpreadBettingConfig {
    fn default() -> Self {
        let levels = [0.01, 0.5, 0.9];
        Self {
            initial_wealth: 80.0,
            theta_c: 0.6,
            horizon: 8,
            actions: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            alpha: 0.6,
            beta: 0.8,
            commission: 0.05,
            n_history: vec![5, 10, 50, 150],
            replications: 100,
            models: BettingModel::ALL.to_vec(),
            seed: 0,
            wealth_max: 150.0,
            wealth_step: 0.1,
            k_theta: 32,
            dr_samples: 20,
            dr_support_bounds: true,
            performance: Performance::Expected,
            hist_levels: levels.iter().flat_map(|&a| levels.iter().map(move |&b| (a, b))).collect(),
            hist_n_history: 10,
            timing: true,
        }
    }
}

impl SpreadBettingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta_c) {
            return Err(invalid("theta_c", format!("{} outside [0,1]", self.theta_c)));
        }
        if self.horizon < 2 {
            return Err(invalid("horizon", "need at least one bet"));
        }
        if self.actions.is_empty() || self.actions.iter().any(|&a| !(a >= 0.0)) {
            return Err(invalid("actions", "need non-negative stakes"));
        }
        if self.actions.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("actions", "must be strictly increasing"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha", format!("{} outside (0,1]", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid("beta", format!("{} outside (0,1]", self.beta)));
        }
        if !(0.0..1.0).contains(&self.commission) {
            return Err(invalid("commission", format!("{} outside [0,1)", self.commission)));
        }
        if self.n_history.is_empty() || self.n_history.contains(&0) {
            return Err(invalid("n_history", "history sizes must be positive"));
        }
        if self.replications == 0 {
            return Err(invalid("replications", "at least one"));
        }
        if !(self.wealth_step > 0.0 && self.wealth_max > 0.0) {
            return Err(invalid("wealth_step", "wealth grid must be positive"));
        }
        if !(self.initial_wealth >= 0.0 && self.initial_wealth <= self.wealth_max) {
            return Err(invalid("initial_wealth", "outside the wealth grid"));
        }
        if self.k_theta == 0 || self.dr_samples == 0 {
            return Err(invalid("k_theta", "quadrature and sample sizes must be positive"));
        }
        for &(a, b) in &self.hist_levels {
            if !(a > 0.0 && a <= 1.0 && b > 0.0 && b <= 1.0) {
                return Err(invalid("hist_levels", format!("({a}, {b}) outside (0,1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpreadModel {
    pub commission: f64,
}

impl SpreadModel {
    fn gain(&self, a: f64, xi: f64) -> f64 {
        if xi == 1.0 {
            (1.0 - self.commission) * a
        } else {
            -a
        }
    }
}

impl Model for SpreadModel {
    fn cost(&self, _t: usize, _s: f64, a: f64, xi: f64) -> f64 {
        -self.gain(a, xi)
    }
    fn transition(&self, _t: usize, s: f64, a: f64, xi: f64) -> f64 {
        s + self.gain(a, xi)
    }
}

/// Grids, problem data and solution caches shared by every replication.
pub struct Betting {
    pub cfg: SpreadBettingConfig,
    pub model: SpreadModel,
    pub states: Vec<f64>,
    pub actions: Vec<Vec<f64>>,
    dirac: Mutex<HashMap<(u64, u64), (Arc<FiniteSolution>, f64)>>,
    bcr: Mutex<HashMap<(u64, u64, u64, u64), (Arc<FinitePolicy>, f64)>>,
}

/// A fitted baseline or BCR policy with the time its solve took.
pub struct Fitted<'a> {
    owner: &'a Betting,
    kind: FittedKind,
    pub seconds: f64,
}

enum FittedKind {
    Table(Arc<FinitePolicy>),
    Dirac(Arc<FiniteSolution>),
    Episodic,
}

impl Policy for Fitted<'_> {
    fn action(&self, t: usize, s: f64, hyper: &[f64]) -> Result<f64> {
        match &self.kind {
            FittedKind::Table(p) => p.action(t, s, hyper),
            FittedKind::Dirac(sol) => self.owner.dirac_action(sol, t, s),
            FittedKind::Episodic => {
                let theta = hyper[0] / (hyper[0] + hyper[1]);
                let (sol, _) = self.owner.dirac_solution(theta, RiskSpec::Expectation)?;
                self.owner.dirac_action(&sol, t, s)
            }
        }
    }
}

fn risk_key(r: &RiskSpec) -> u64 {
    match r {
        RiskSpec::Expectation => 0,
        RiskSpec::AVaR { alpha } => alpha.to_bits(),
        RiskSpec::VaR { alpha } => alpha.to_bits() ^ 1,
        _ => u64::MAX,
    }
}

impl Betting {
    pub fn new(cfg: SpreadBettingConfig) -> Result<Self> {
        cfg.validate()?;
        let n = (cfg.wealth_max / cfg.wealth_step).round() as usize;
        let states: Vec<f64> = (0..=n).map(|i| i as f64 * cfg.wealth_step).collect();
        let model = SpreadModel {
            commission: cfg.commission,
        };
        let top = states[n];
        let actions = states
            .iter()
            .map(|&s| {
                cfg.actions
                    .iter()
                    .cloned()
                    .filter(|&a| a <= s + 1e-9 && s + model.gain(a, 1.0) <= top + 1e-9)
                    .collect::<Vec<f64>>()
            })
            .map(|v| if v.is_empty() { vec![0.0] } else { v })
            .collect();
        Ok(Self {
            cfg,
            model,
            states,
            actions,
            dirac: Mutex::new(HashMap::new()),
            bcr: Mutex::new(HashMap::new()),
        })
    }

    fn problem(&self, risk: BcrSpec) -> ProblemSpec<SpreadModel> {
        ProblemSpec {
            model: self.model,
            states: self.states.clone(),
            actions: self.actions.clone(),
            gamma: 1.0,
            horizon: self.cfg.horizon,
            risk: vec![risk],
            support: SUPPORT.to_vec(),
        }
    }

    fn dirac_action(&self, sol: &FiniteSolution, t: usize, s: f64) -> Result<f64> {
        let (i, _) = snap(&self.states, s)?;
        Ok(self.actions[i][sol.action_index(t, i, 0)])
    }

    /// Known-parameter solution with inner risk `inner`, cached by `theta`.
    pub fn dirac_solution(&self, theta: f64, inner: RiskSpec) -> Result<(Arc<FiniteSolution>, f64)> {
        let key = (theta.to_bits(), risk_key(&inner));
        if let Some(hit) = self.dirac.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let start = Instant::now();
        let space = BeliefSpace::dirac(ConjugateFamily::BetaBernoulli, Theta::scalar(theta), &SUPPORT)?;
        let sol = Arc::new(solve_finite(&self.problem(BcrSpec::new(RiskSpec::Expectation, inner)?), &space)?);
        let entry = (sol, start.elapsed().as_secs_f64());
        self.dirac.lock().unwrap().insert(key, entry.clone());
        Ok(entry)
    }

    /// Composite-risk policy on the exact belief tree rooted at `prior`.
    pub fn bcr_policy(&self, prior: &Belief, risk: BcrSpec) -> Result<(Arc<FinitePolicy>, f64)> {
        let h = prior.hyper();
        let key = (h[0].to_bits(), h[1].to_bits(), risk_key(&risk.outer), risk_key(&risk.inner));
        if let Some(hit) = self.bcr.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let start = Instant::now();
        let params = GridParams {
            m_max: self.cfg.horizon + 1,
            ..GridParams::default()
        };
        let levels = build_grids(prior, self.cfg.horizon, &params)?;
        let space = BeliefSpace::adaptive(ConjugateFamily::BetaBernoulli, &levels, &SUPPORT, self.cfg.k_theta)?;
        let solution = solve_finite(&self.problem(risk), &space)?;
        let policy = Arc::new(FinitePolicy {
            states: self.states.clone(),
            actions: self.actions.clone(),
            solution,
            space,
        });
        let entry = (policy, start.elapsed().as_secs_f64());
        self.bcr.lock().unwrap().insert(key, entry.clone());
        Ok(entry)
    }

    /// Fits `model` to a history of `0/1` records. `dr_path` seeds the
    /// posterior draws of the robust baseline.
    pub fn fit(&self, model: BettingModel, history: &[f64], dr_path: &[u64]) -> Result<Fitted<'_>> {
        let cfg = &self.cfg;
        let fam = ConjugateFamily::BetaBernoulli;
        let posterior = Belief::beta(1.0, 1.0)?.update_batch(history)?;
        let bcr = |outer: RiskSpec, inner: RiskSpec| -> Result<Fitted<'_>> {
            let (p, seconds) = self.bcr_policy(&posterior, BcrSpec::new(outer, inner)?)?;
            Ok(Fitted {
                owner: self,
                kind: FittedKind::Table(p),
                seconds,
            })
        };
        let dirac = |theta: f64, inner: RiskSpec| -> Result<Fitted<'_>> {
            let (sol, seconds) = self.dirac_solution(theta, inner)?;
            Ok(Fitted {
                owner: self,
                kind: FittedKind::Dirac(sol),
                seconds,
            })
        };
        match model {
            BettingModel::BcrExpExp => bcr(RiskSpec::Expectation, RiskSpec::Expectation),
            BettingModel::BcrVarExp => bcr(RiskSpec::var(cfg.alpha), RiskSpec::Expectation),
            BettingModel::BcrAvarExp => bcr(RiskSpec::avar(cfg.alpha), RiskSpec::Expectation),
            BettingModel::BcrAvarAvar => bcr(RiskSpec::avar(cfg.alpha), RiskSpec::avar(cfg.beta)),
            BettingModel::Standard => dirac(fam.mle(history)?.value(), RiskSpec::Expectation),
            BettingModel::RiskAverse => dirac(fam.mle(history)?.value(), RiskSpec::avar(cfg.beta)),
            BettingModel::EpisodicBayes => {
                let h = posterior.hyper();
                let (_, seconds) = self.dirac_solution(h[0] / (h[0] + h[1]), RiskSpec::Expectation)?;
                Ok(Fitted {
                    owner: self,
                    kind: FittedKind::Episodic,
                    seconds,
                })
            }
            BettingModel::DistRobust => {
                let start = Instant::now();
                let draws = posterior.sample_theta(cfg.dr_samples, &mut seed::rng(cfg.seed, dr_path))?;
                let mut atoms: Vec<(Theta, f64)> = draws.into_iter().map(|t| (t, 1.0)).collect();
                if cfg.dr_support_bounds {
                    atoms.push((Theta::scalar(0.0), 1.0));
                    atoms.push((Theta::scalar(1.0), 1.0));
                }
                let space = BeliefSpace::fixed(fam, atoms, &SUPPORT)?;
                let risk = BcrSpec::new(RiskSpec::var(0.0), RiskSpec::Expectation)?;
                let solution = solve_finite(&self.problem(risk), &space)?;
                let p = FinitePolicy {
                    states: self.states.clone(),
                    actions: self.actions.clone(),
                    solution,
                    space,
                };
                Ok(Fitted {
                    owner: self,
                    kind: FittedKind::Table(Arc::new(p)),
                    seconds: start.elapsed().as_secs_f64(),
                })
            }
        }
    }

    /// Scores a fitted policy from the post-history belief.
    pub fn performance(&self, policy: &dyn Policy, history: &[f64], path: &[u64]) -> Result<f64> {
        let posterior = Belief::beta(1.0, 1.0)?.update_batch(history)?;
        let theta = [self.cfg.theta_c];
        let env = Environment {
            model: &self.model,
            family: ConjugateFamily::BetaBernoulli,
            theta: &theta,
            gamma: 1.0,
            decisions: self.cfg.horizon - 1,
            s0: self.cfg.initial_wealth,
            h0: posterior.hyper().to_vec(),
        };
        match self.cfg.performance {
            Performance::Expected => exact_expected_cost(&env, policy, &SUPPORT),
            Performance::Realized => rollout(&env, policy, &mut seed::rng(self.cfg.seed, path)),
        }
    }

    /// `n` records drawn from the true market for replication `rep`.
    pub fn history(&self, n: usize, rep: usize) -> Result<Vec<f64>> {
        let mut rng = seed::rng(self.cfg.seed, &[n as u64, rep as u64, 0]);
        let theta = [self.cfg.theta_c];
        (0..n)
            .map(|_| ConjugateFamily::BetaBernoulli.sample_obs(&theta, &mut rng))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub model: BettingModel,
    pub n_history: usize,
    pub mean: f64,
    pub variance: f64,
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistRow {
    pub alpha: f64,
    pub beta: f64,
    pub replication: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadReport {
    pub results: Vec<ReplicationResult>,
    pub summary: Vec<SummaryRow>,
    pub hist: Vec<HistRow>,
}

impl SpreadReport {
    pub fn summary_for(&self, model: BettingModel, n: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.model == model && r.n_history == n)
    }

    pub fn summary_csv(&self, timing: bool) -> Csv {
        let mut t = Csv::new(&["model", "N", "mean", "variance", "cpu_seconds"]);
        for r in &self.summary {
            t.push(vec![
                r.model.tag().into(),
                r.n_history.to_string(),
                fmt_float(r.mean),
                fmt_float(r.variance),
                fmt_float(if timing { r.cpu_seconds } else { 0.0 }),
            ]);
        }
        t
    }

    pub fn hist_csv(&self) -> Csv {
        let mut t = Csv::new(&["model", "alpha", "beta", "replication", "loss"]);
        for r in &self.hist {
            t.push(vec![
                BettingModel::BcrAvarAvar.tag().into(),
                fmt_float(r.alpha),
                fmt_float(r.beta),
                r.replication.to_string(),
                fmt_float(r.loss),
            ]);
        }
        t
    }

    pub fn write(&self, dir: &Path, timing: bool) -> Result<()> {
        self.summary_csv(timing).write(&dir.join("betting_summary.csv"))?;
        self.hist_csv().write(&dir.join("betting_hist.csv"))
    }
}

/// Runs every model on `replications` independent histories per size.
pub fn run_spread_betting(cfg: &SpreadBettingConfig) -> Result<SpreadReport> {
    let b = Betting::new(cfg.clone())?;
    let mut results = Vec::new();
    let mut summary = Vec::new();
    for &n in &cfg.n_history {
        let per_rep: Vec<Vec<ReplicationResult>> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let history = b.history(n, rep)?;
                cfg.models
                    .iter()
                    .map(|&m| {
                        let fitted = b.fit(m, &history, &[n as u64, rep as u64, 2])?;
                        let loss = b.performance(&fitted, &history, &[n as u64, rep as u64, 1])?;
                        Ok(ReplicationResult {
                            model: m.tag().into(),
                            index: n,
                            replication: rep,
                            loss,
                            cpu_seconds: fitted.seconds,
                            seed: seed::derive(cfg.seed, &[n as u64, rep as u64]),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (k, &m) in cfg.models.iter().enumerate() {
            let w: Welford = per_rep.iter().map(|r| r[k].loss).collect();
            let cpu = per_rep.iter().map(|r| r[k].cpu_seconds).sum::<f64>() / cfg.replications as f64;
            summary.push(SummaryRow {
                model: m,
                n_history: n,
                mean: w.mean(),
                variance: w.variance(),
                cpu_seconds: cpu,
            });
        }
        results.extend(per_rep.into_iter().flatten());
    }
    let mut hist = Vec::new();
    if !cfg.hist_levels.is_empty() {
        let n = cfg.hist_n_history;
        for &(alpha, beta) in &cfg.hist_levels {
            let risk = BcrSpec::new(RiskSpec::avar(alpha), RiskSpec::avar(beta))?;
            let rows: Vec<HistRow> = (0..cfg.replications)
                .into_par_iter()
                .map(|rep| {
                    let history = b.history(n, rep)?;
                    let posterior = Belief::beta(1.0, 1.0)?.update_batch(&history)?;
                    let (p, _) = b.bcr_policy(&posterior, risk.clone())?;
                    let loss = b.performance(p.as_ref(), &history, &[n as u64, rep as u64, 1])?;
                    Ok(HistRow {
                        alpha,
                        beta,
                        replication: rep,
                        loss,
                    })
                })
                .collect::<Result<_>>()?;
            hist.extend(rows);
        }
    }
    Ok(SpreadReport { results, summary, hist })
}
