//! Command-line front end.
//!
//! Every subcommand reads an optional TOML file, applies `--set KEY=VALUE`
//! overrides (dotted keys reach nested tables), fills defaults, rejects
//! unknown keys and validates before running. Exit codes: 0 success,
//! 1 runtime error, 2 usage error, 3 validation error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bayes::{Belief, ConjugateFamily};
use crate::bench::csv::{fmt_float, Table as Csv};
use crate::bench::grid_error::{run_grid_error, GridErrorConfig};
use crate::bench::inventory::{run_inventory, solve, InventoryConfig, InventoryModelKind};
use crate::bench::spread::{run_spread_betting, Betting, SpreadBettingConfig, SpreadModel};
use crate::error::{invalid, Error, Result};
use crate::grid::{build_grids, to_text, GridParams};
use crate::risk::BcrSpec;
use crate::saa::{avar_avar_solve, var_expectation_solve, SaaConfig, StepContext};

#[derive(Debug, Parser)]
#[command(name = "bcr", version, about = "Bayesian composite risk solvers and experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override a configuration key, e.g. `--set grid.eps=1.5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Finite-horizon spread-betting policy from one prior.
    SolveFinite,
    /// Infinite-horizon inventory value iteration from one prior.
    SolveInfinite,
    /// Adaptive hyper-parameter grids.
    Grid,
    /// Spread-betting model comparison.
    BetExperiment,
    /// Inventory value-gap study.
    InventoryExperiment,
    /// Grid projection-error study.
    GridError,
    /// One sampled decision step of the spread-betting problem.
    SaaStep,
}

/// A configuration the CLI can load.
pub trait ExperimentConfig: Serialize + DeserializeOwned {
    fn validate(&self) -> Result<()>;
    fn set_seed(&mut self, seed: u64);
}

macro_rules! experiment_config {
    ($($t:ty),*) => {$(
        impl ExperimentConfig for $t {
            fn validate(&self) -> Result<()> {
                <$t>::validate(self)
            }
            fn set_seed(&mut self, seed: u64) {
                self.seed = seed;
            }
        }
    )*};
}

experiment_config!(SpreadBettingConfig, InventoryConfig, GridErrorConfig, FiniteConfig, InfiniteConfig, GridConfig, SaaStepConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteConfig {
    pub prior: (f64, f64),
    pub risk: BcrSpec,
    pub initial_wealth: f64,
    pub horizon: usize,
    pub actions: Vec<f64>,
    pub commission: f64,
    pub wealth_max: f64,
    pub wealth_step: f64,
    pub k_theta: usize,
    pub seed: u64,
}

impl Default for FiniteConfig {
    fn default() -> Self {
        let b = SpreadBettingConfig::default();
        Self {
            prior: (1.0, 1.0),
            risk: BcrSpec::expectation(),
            initial_wealth: b.initial_wealth,
            horizon: b.horizon,
            actions: b.actions,
            commission: b.commission,
            wealth_max: b.wealth_max,
            wealth_step: b.wealth_step,
            k_theta: b.k_theta,
            seed: 0,
        }
    }
}

impl FiniteConfig {
    fn betting(&self) -> SpreadBettingConfig {
        SpreadBettingConfig {
            initial_wealth: self.initial_wealth,
            horizon: self.horizon,
            actions: self.actions.clone(),
            commission: self.commission,
            wealth_max: self.wealth_max,
            wealth_step: self.wealth_step,
            k_theta: self.k_theta,
            seed: self.seed,
            ..SpreadBettingConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        Belief::beta(self.prior.0, self.prior.1)?;
        self.risk.validate()?;
        self.betting().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfiniteConfig {
    pub prior: (f64, f64),
    pub model: InventoryModelKind,
    pub inventory: InventoryConfig,
    pub seed: u64,
}

impl Default for InfiniteConfig {
    fn default() -> Self {
        Self {
            prior: (1.0, 1.0),
            model: InventoryModelKind::BcrVarExp,
            inventory: InventoryConfig::default(),
            seed: 0,
        }
    }
}

impl InfiniteConfig {
    pub fn validate(&self) -> Result<()> {
        Belief::gamma_poisson(self.prior.0, self.prior.1)?;
        self.inventory.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub family: ConjugateFamily,
    pub prior: Vec<f64>,
    pub stages: usize,
    pub params: GridParams,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            family: ConjugateFamily::GammaPoisson,
            prior: vec![1.0, 1.0],
            stages: 10,
            params: GridParams::default(),
            seed: 0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        Belief::new(self.family, self.prior.clone())?;
        if self.stages == 0 {
            return Err(invalid("stages", "at least one stage"));
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaaMethod {
    VarExpectation,
    AvarAvar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaaStepConfig {
    pub method: SaaMethod,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub prior: (f64, f64),
    pub wealth: f64,
    pub actions: Vec<f64>,
    pub commission: f64,
    pub seed: u64,
}

impl Default for SaaStepConfig {
    fn default() -> Self {
        Self {
            method: SaaMethod::VarExpectation,
            n: 100,
            m: 100,
            alpha: 0.6,
            beta: 0.8,
            prior: (1.0, 1.0),
            wealth: 80.0,
            actions: SpreadBettingConfig::default().actions,
            commission: 0.05,
            seed: 0,
        }
    }
}

impl SaaStepConfig {
    fn saa(&self) -> SaaConfig {
        SaaConfig {
            n: self.n,
            m: self.m,
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.saa().validate()?;
        Belief::beta(self.prior.0, self.prior.1)?;
        if self.actions.is_empty() || self.actions.iter().any(|&a| !(a >= 0.0 && a <= self.wealth)) {
            return Err(invalid("actions", "stakes must lie in [0, wealth]"));
        }
        if !(0.0..1.0).contains(&self.commission) {
            return Err(invalid("commission", "outside [0,1)"));
        }
        Ok(())
    }
}

/// Sets `key` (dotted for nested tables) to `raw`, read as a TOML value
/// when possible and as a string otherwise.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not KEY=VALUE")))?;
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{part}` in `{key}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Reads, overrides, fills defaults and validates a configuration.
pub fn parse_config<T: ExperimentConfig>(path: Option<&Path>, overrides: &[String]) -> Result<T> {
    let mut table = match path {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            text.parse::<toml::Table>().map_err(|e| parse_error(&text, e))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: T = T::deserialize(toml::Value::Table(table)).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_error(text: &str, e: toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::Parse {
        line,
        message: e.message().to_string(),
    }
}

pub fn to_toml<T: Serialize>(cfg: &T) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

/// Exit status for an error category.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter { .. }
        | Error::InvalidRiskSpec(_)
        | Error::InvalidDistribution(_)
        | Error::Config(_)
        | Error::Parse { .. } => 3,
        _ => 1,
    }
}

fn load<T: ExperimentConfig>(run: &RunArgs) -> Result<T> {
    let mut cfg: T = parse_config(run.config.as_deref(), &run.overrides)?;
    if let Some(seed) = run.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

/// Runs one subcommand and returns the files it wrote.
pub fn dispatch(command: Command, run: &RunArgs) -> Result<Vec<PathBuf>> {
    let out = &run.out;
    fs::create_dir_all(out)?;
    let written = |names: &[&str]| names.iter().map(|n| out.join(n)).collect::<Vec<_>>();
    match command {
        Command::BetExperiment => {
            let cfg: SpreadBettingConfig = load(run)?;
            run_spread_betting(&cfg)?.write(out, cfg.timing)?;
            Ok(written(&["betting_summary.csv", "betting_hist.csv"]))
        }
        Command::InventoryExperiment => {
            let cfg: InventoryConfig = load(run)?;
            let report = run_inventory(&cfg)?;
            report.write(out)?;
            if report.perf.is_empty() {
                Ok(written(&["inventory_gap.csv"]))
            } else {
                Ok(written(&["inventory_gap.csv", "inventory_perf.csv"]))
            }
        }
        Command::GridError => {
            let cfg: GridErrorConfig = load(run)?;
            run_grid_error(&cfg)?.write(out)?;
            Ok(written(&["grid_error.csv"]))
        }
        Command::Grid => {
            let cfg: GridConfig = load(run)?;
            let prior = Belief::new(cfg.family, cfg.prior.clone())?;
            let levels = build_grids(&prior, cfg.stages, &cfg.params)?;
            fs::write(out.join("grid.txt"), to_text(&levels))?;
            Ok(written(&["grid.txt"]))
        }
        Command::SolveFinite => {
            let cfg: FiniteConfig = load(run)?;
            let b = Betting::new(cfg.betting())?;
            let prior = Belief::beta(cfg.prior.0, cfg.prior.1)?;
            let (policy, _) = b.bcr_policy(&prior, cfg.risk.clone())?;
            let mut t = Csv::new(&["t", "state", "node", "m", "d", "value", "action"]);
            for stage in 1..cfg.horizon {
                for (n, node) in policy.space.layer(stage).nodes.iter().enumerate() {
                    let h = node.hyper.clone().unwrap_or_default();
                    for (i, &s) in b.states.iter().enumerate() {
                        t.push(vec![
                            stage.to_string(),
                            fmt_float(s),
                            n.to_string(),
                            fmt_float(h[0]),
                            fmt_float(h[1]),
                            fmt_float(policy.solution.value(stage, i, n)),
                            fmt_float(b.actions[i][policy.solution.action_index(stage, i, n)]),
                        ]);
                    }
                }
            }
            t.write(&out.join("finite_values.csv"))?;
            Ok(written(&["finite_values.csv"]))
        }
        Command::SolveInfinite => {
            let cfg: InfiniteConfig = load(run)?;
            let inv = &cfg.inventory;
            let space = inv.belief_space(&[cfg.prior.0, cfg.prior.1])?;
            let solved = solve(inv, cfg.model, space)?;
            let problem = inv.problem(inv.risk(cfg.model));
            let mut t = Csv::new(&["state", "node", "m", "d", "value", "action"]);
            for (n, node) in solved.space.layers[0].nodes.iter().enumerate() {
                let h = node.hyper.clone().unwrap_or_default();
                for (i, &s) in problem.states.iter().enumerate() {
                    t.push(vec![
                        fmt_float(s),
                        n.to_string(),
                        fmt_float(h[0]),
                        fmt_float(h[1]),
                        fmt_float(*solved.values.get(i, n)),
                        fmt_float(problem.actions[i][*solved.policy.get(i, n)]),
                    ]);
                }
            }
            t.write(&out.join("infinite_values.csv"))?;
            Ok(written(&["infinite_values.csv"]))
        }
        Command::SaaStep => {
            let cfg: SaaStepConfig = load(run)?;
            let belief = Belief::beta(cfg.prior.0, cfg.prior.1)?;
            let model = SpreadModel {
                commission: cfg.commission,
            };
            let zero = |_s: f64, _h: &[f64]| 0.0;
            let ctx = StepContext {
                model: &model,
                t: 1,
                state: cfg.wealth,
                belief: &belief,
                actions: &cfg.actions,
                gamma: 1.0,
                continuation: &zero,
            };
            let sol = match cfg.method {
                SaaMethod::VarExpectation => var_expectation_solve(&ctx, &cfg.saa())?,
                SaaMethod::AvarAvar => avar_avar_solve(&ctx, &cfg.saa())?,
            };
            let mut t = Csv::new(&["action", "value", "chosen"]);
            for (k, (&a, &v)) in cfg.actions.iter().zip(&sol.values).enumerate() {
                t.push(vec![fmt_float(a), fmt_float(v), (k == sol.action_index).to_string()]);
            }
            t.write(&out.join("saa_step.csv"))?;
            Ok(written(&["saa_step.csv"]))
        }
    }
}

/// Parses arguments, runs and maps the outcome to an exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.run.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return 2;
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match dispatch(cli.command, &cli.run) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
