//! Projection-error study of the adaptive grids.
//!
//! For each `(eps, M_max)` cell the grids are built once from the prior and
//! `delta_I = dist(h_1 + sum_j H(xi_j), H_I)` is sampled over demand paths.
//! Paths are shared across cells so cells can be compared pairwise.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::csv::{fmt_float, Table as Csv};
use super::median_of;
use crate::bayes::{Belief, ConjugateFamily};
use crate::error::{invalid, Result};
use crate::grid::{build_grids, GridParams};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridErrorConfig {
    /// `I`: the error is measured at stage `I`.
    pub stages: usize,
    pub radius: f64,
    pub theta_c: f64,
    pub prior: (f64, f64),
    pub eps: Vec<f64>,
    pub m_max: Vec<usize>,
    pub runs: usize,
    pub max_passes: usize,
    /// Lipschitz modulus of the statistic map.
    pub lipschitz: f64,
    pub seed: u64,
}

impl Default for GridErrorConfig {
    fn default() -> Self {
        Self {
            stages: 10,
            radius: 20.0,
            theta_c: 10.0,
            prior: (1.0, 1.0),
            eps: vec![1.0, 1.5, 2.0],
            m_max: vec![10, 20, 100],
            runs: 500,
            max_passes: 4,
            lipschitz: 1.0,
            seed: 0,
        }
    }
}

impl GridErrorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages < 2 {
            return Err(invalid("stages", "need at least two stages"));
        }
        if !(self.theta_c > 0.0) {
            return Err(invalid("theta_c", "Poisson mean must be positive"));
        }
        if self.eps.is_empty() || self.m_max.is_empty() || self.runs == 0 {
            return Err(invalid("runs", "empty study"));
        }
        if self.lipschitz < 0.0 {
            return Err(invalid("lipschitz", "must be non-negative"));
        }
        Ok(())
    }

    /// `(I - 1)(1 + L_H) eps`.
    pub fn bound(&self, eps: f64) -> f64 {
        (self.stages - 1) as f64 * (1.0 + self.lipschitz) * eps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridErrorRun {
    pub eps: f64,
    pub m_max: usize,
    pub replication: usize,
    pub delta: f64,
    pub bound: f64,
    /// Every observation stayed within the radius.
    pub in_radius: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridErrorCell {
    pub eps: f64,
    pub m_max: usize,
    pub bound: f64,
    pub median_delta: f64,
    pub max_delta_in_radius: f64,
    /// Share of all runs whose error exceeds the bound.
    pub exceedance_rate: f64,
    pub in_radius_rate: f64,
    pub grid_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridErrorReport {
    pub runs: Vec<GridErrorRun>,
    pub cells: Vec<GridErrorCell>,
}

impl GridErrorReport {
    pub fn csv(&self) -> Csv {
        let mut t = Csv::new(&["eps", "mmax", "replication", "delta", "bound"]);
        for r in &self.runs {
            t.push(vec![
                fmt_float(r.eps),
                r.m_max.to_string(),
                r.replication.to_string(),
                fmt_float(r.delta),
                fmt_float(r.bound),
            ]);
        }
        t
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.csv().write(&dir.join("grid_error.csv"))
    }

    pub fn cell(&self, eps: f64, m_max: usize) -> Option<&GridErrorCell> {
        self.cells.iter().find(|c| c.eps == eps && c.m_max == m_max)
    }
}

pub fn run_grid_error(cfg: &GridErrorConfig) -> Result<GridErrorReport> {
    cfg.validate()?;
    let family = ConjugateFamily::GammaPoisson;
    let prior = Belief::new(family, vec![cfg.prior.0, cfg.prior.1])?;
    let theta = [cfg.theta_c];
    let paths: Vec<Vec<f64>> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(cfg.seed, &[r as u64]);
            (1..cfg.stages).map(|_| family.sample_obs(&theta, &mut rng)).collect()
        })
        .collect::<Result<_>>()?;
    let mut runs = Vec::new();
    let mut cells = Vec::new();
    for &eps in &cfg.eps {
        for &m_max in &cfg.m_max {
            let params = GridParams {
                radius: cfg.radius,
                eps,
                m_max,
                max_passes: cfg.max_passes,
            };
            let levels = build_grids(&prior, cfg.stages, &params)?;
            let last = &levels[cfg.stages - 1];
            let bound = cfg.bound(eps);
            let cell_runs: Vec<GridErrorRun> = paths
                .iter()
                .enumerate()
                .map(|(r, xs)| {
                    let h = xs.iter().fold(prior.hyper().to_vec(), |h, &x| family.successor(&h, x));
                    GridErrorRun {
                        eps,
                        m_max,
                        replication: r,
                        delta: last.projection_error(&h),
                        bound,
                        in_radius: xs.iter().all(|&x| x <= cfg.radius),
                    }
                })
                .collect();
            let deltas: Vec<f64> = cell_runs.iter().map(|r| r.delta).collect();
            let n = cell_runs.len() as f64;
            cells.push(GridErrorCell {
                eps,
                m_max,
                bound,
                median_delta: median_of(&deltas),
                max_delta_in_radius: cell_runs
                    .iter()
                    .filter(|r| r.in_radius)
                    .map(|r| r.delta)
                    .fold(0.0, f64::max),
                exceedance_rate: cell_runs.iter().filter(|r| r.delta > bound).count() as f64 / n,
                in_radius_rate: cell_runs.iter().filter(|r| r.in_radius).count() as f64 / n,
                grid_size: last.len(),
            });
            runs.extend(cell_runs);
        }
    }
    Ok(GridErrorReport { runs, cells })
}
