//! Finite-horizon dynamic programming over the augmented state `(s, h)`.
//!
//! Beliefs live in a [`BeliefSpace`]: one layer of nodes per stage, each node
//! carrying a finite `theta` quadrature, the observation likelihoods under
//! every atom and the successor node for every observation. The Bellman
//! stage applies the inner risk measure per `theta` atom and the outer one
//! across atoms.

use rayon::prelude::*;

use crate::bayes::{Belief, ConjugateFamily, Theta};
use crate::error::{invalid, Error, Result};
use crate::grid::GridLevel;
use crate::risk::{BcrSpec, RiskSpec};

/// Stage cost, transition and terminal cost. Stationary problems ignore `t`.
pub trait Model: Sync {
    fn cost(&self, t: usize, s: f64, a: f64, xi: f64) -> f64;
    fn transition(&self, t: usize, s: f64, a: f64, xi: f64) -> f64;
    fn terminal(&self, _s: f64) -> f64 {
        0.0
    }
}

/// A [`Model`] assembled from closures.
pub struct FnModel<C, G, F> {
    pub cost: C,
    pub transition: G,
    pub terminal: F,
}

impl<C, G, F> Model for FnModel<C, G, F>
where
    C: Fn(usize, f64, f64, f64) -> f64 + Sync,
    G: Fn(usize, f64, f64, f64) -> f64 + Sync,
    F: Fn(f64) -> f64 + Sync,
{
    fn cost(&self, t: usize, s: f64, a: f64, xi: f64) -> f64 {
        (self.cost)(t, s, a, xi)
    }
    fn transition(&self, t: usize, s: f64, a: f64, xi: f64) -> f64 {
        (self.transition)(t, s, a, xi)
    }
    fn terminal(&self, s: f64) -> f64 {
        (self.terminal)(s)
    }
}

pub struct ProblemSpec<M> {
    pub model: M,
    /// Ascending physical state grid.
    pub states: Vec<f64>,
    /// Admissible actions per state, ascending.
    pub actions: Vec<Vec<f64>>,
    pub gamma: f64,
    /// `T`: decisions at stages `1..T`, terminal cost at stage `T`.
    pub horizon: usize,
    /// One composite risk per decision stage, or a single one for all.
    pub risk: Vec<BcrSpec>,
    /// Observation atoms shared by every belief node.
    pub support: Vec<f64>,
}

impl<M: Model> ProblemSpec<M> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("gamma", format!("{} outside (0,1]", self.gamma)));
        }
        if self.horizon < 2 {
            return Err(invalid("horizon", "need at least two stages"));
        }
        validate_grid(&self.states, &self.actions, &self.support)?;
        if self.risk.is_empty() || (self.risk.len() != 1 && self.risk.len() != self.horizon - 1) {
            return Err(invalid("risk", "give one spec or one per decision stage"));
        }
        self.risk.iter().try_for_each(BcrSpec::validate)
    }

    pub fn risk_at(&self, t: usize) -> &BcrSpec {
        &self.risk[(t - 1).min(self.risk.len() - 1)]
    }
}

pub(crate) fn validate_grid(states: &[f64], actions: &[Vec<f64>], support: &[f64]) -> Result<()> {
    if states.is_empty() || states.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("states", "must be non-empty and strictly increasing"));
    }
    if actions.len() != states.len() || actions.iter().any(Vec::is_empty) {
        return Err(invalid("actions", "every state needs at least one action"));
    }
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    Ok(())
}

/// Snaps successor values to the nearest state; rejects values farther
/// from the grid than its spacing.
pub(crate) fn snap(states: &[f64], x: f64) -> Result<(usize, f64)> {
    let i = states.partition_point(|&v| v < x);
    let (idx, dist) = match (i.checked_sub(1), states.get(i)) {
        (Some(lo), Some(&hi)) if hi - x < x - states[lo] => (i, hi - x),
        (Some(lo), _) => (lo, x - states[lo]),
        (None, Some(&hi)) => (i, hi - x),
        (None, None) => unreachable!("non-empty grid"),
    };
    let spacing = if states.len() == 1 {
        0.0
    } else {
        let j = idx.min(states.len() - 2);
        states[j + 1] - states[j]
    };
    if dist > spacing + 1e-9 {
        return Err(Error::Boundary {
            value: x,
            distance: dist,
            spacing,
        });
    }
    Ok((idx, dist))
}

/// Values or actions indexed by `(state, node)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<T> {
    n_nodes: usize,
    data: Vec<T>,
}

impl<T: Clone> Table<T> {
    pub fn filled(n_states: usize, n_nodes: usize, v: T) -> Self {
        Self {
            n_nodes,
            data: vec![v; n_states * n_nodes],
        }
    }
}

impl<T> Table<T> {
    pub fn from_fn(n_states: usize, n_nodes: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n_states * n_nodes);
        for s in 0..n_states {
            for n in 0..n_nodes {
                data.push(f(s, n));
            }
        }
        Self { n_nodes, data }
    }

    pub fn n_states(&self) -> usize {
        self.data.len() / self.n_nodes.max(1)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn get(&self, s: usize, node: usize) -> &T {
        &self.data[s * self.n_nodes + node]
    }

    pub fn set(&mut self, s: usize, node: usize, v: T) {
        self.data[s * self.n_nodes + node] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl Table<f64> {
    /// `max |a - b|` over all cells.
    pub fn sup_distance(&self, other: &Table<f64>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A belief node: `theta` atoms with weights, the observation law under each
/// atom, and the successor node for every observation atom.
#[derive(Debug, Clone)]
pub struct BeliefNode {
    pub hyper: Option<Vec<f64>>,
    pub thetas: Vec<Theta>,
    pub theta_weights: Vec<f64>,
    /// `lik[j][k]`: probability of observation `k` under atom `j`.
    pub lik: Vec<Vec<f64>>,
    pub next: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BeliefLayer {
    pub nodes: Vec<BeliefNode>,
}

impl BeliefLayer {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nearest node by hyper-parameter distance; ties to the lower index.
    pub fn rep(&self, h: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(hyper) = &n.hyper {
                let d: f64 = hyper.iter().zip(h).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.1 {
                    best = (i, d);
                }
            }
        }
        best.0
    }
}

/// Belief layers indexed by stage (`layers[t - 1]` for stage `t`). A space
/// with a single layer is stationary: successors point back into it.
#[derive(Debug, Clone)]
pub struct BeliefSpace {
    pub family: ConjugateFamily,
    pub support: Vec<f64>,
    pub layers: Vec<BeliefLayer>,
}

impl BeliefSpace {
    /// Learning beliefs on adaptive grid levels, one level per stage.
    pub fn adaptive(family: ConjugateFamily, levels: &[GridLevel], support: &[f64], k_theta: usize) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("levels", "at least one grid level is required"));
        }
        let mut layers = Vec::with_capacity(levels.len());
        for (i, level) in levels.iter().enumerate() {
            let target = levels.get(i + 1).unwrap_or(level);
            layers.push(grid_layer(family, level, target, support, k_theta)?);
        }
        Ok(Self {
            family,
            support: support.to_vec(),
            layers,
        })
    }

    /// A single grid level whose successors are projected back onto itself.
    pub fn stationary(family: ConjugateFamily, level: &GridLevel, support: &[f64], k_theta: usize) -> Result<Self> {
        Ok(Self {
            family,
            support: support.to_vec(),
            layers: vec![grid_layer(family, level, level, support, k_theta)?],
        })
    }

    /// A belief that never learns: fixed `theta` atoms with weights. One atom
    /// is a Dirac belief; several give a static ambiguity set.
    pub fn fixed(family: ConjugateFamily, thetas: Vec<(Theta, f64)>, support: &[f64]) -> Result<Self> {
        if thetas.is_empty() {
            return Err(invalid("thetas", "at least one atom is required"));
        }
        let total: f64 = thetas.iter().map(|t| t.1).sum();
        let lik = thetas
            .iter()
            .map(|(t, _)| family.likelihood_weights(t.as_slice(), support))
            .collect();
        let node = BeliefNode {
            hyper: None,
            theta_weights: thetas.iter().map(|t| t.1 / total).collect(),
            thetas: thetas.into_iter().map(|t| t.0).collect(),
            lik,
            next: vec![0; support.len()],
        };
        Ok(Self {
            family,
            support: support.to_vec(),
            layers: vec![BeliefLayer { nodes: vec![node] }],
        })
    }

    pub fn dirac(family: ConjugateFamily, theta: Theta, support: &[f64]) -> Result<Self> {
        Self::fixed(family, vec![(theta, 1.0)], support)
    }

    /// Layer used at stage `t` (1-based); stationary spaces reuse their layer.
    pub fn layer(&self, t: usize) -> &BeliefLayer {
        &self.layers[(t - 1).min(self.layers.len() - 1)]
    }
}

fn grid_layer(
    family: ConjugateFamily,
    level: &GridLevel,
    target: &GridLevel,
    support: &[f64],
    k_theta: usize,
) -> Result<BeliefLayer> {
    let nodes = level
        .nodes
        .iter()
        .map(|n| {
            let belief = Belief::new(family, n.hyper.clone())?;
            let quad = belief.theta_quadrature(k_theta)?;
            let lik = quad
                .iter()
                .map(|(t, _)| family.likelihood_weights(t.as_slice(), support))
                .collect();
            let next = support
                .iter()
                .map(|&xi| target.rep(&family.successor(&n.hyper, xi)))
                .collect();
            Ok(BeliefNode {
                hyper: Some(n.hyper.clone()),
                theta_weights: quad.iter().map(|q| q.1).collect(),
                thetas: quad.into_iter().map(|q| q.0).collect(),
                lik,
                next,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BeliefLayer { nodes })
}

/// Costs and snapped successor states for every `(state, action, xi)`.
pub(crate) struct Kernel {
    offsets: Vec<usize>,
    n_xi: usize,
    cost: Vec<f64>,
    next: Vec<usize>,
    pub max_snap: f64,
}

impl Kernel {
    pub(crate) fn build<M: Model>(
        model: &M,
        t: usize,
        states: &[f64],
        actions: &[Vec<f64>],
        support: &[f64],
    ) -> Result<Self> {
        let n_xi = support.len();
        let mut offsets = Vec::with_capacity(states.len() + 1);
        let mut cost = Vec::new();
        let mut next = Vec::new();
        let mut max_snap: f64 = 0.0;
        offsets.push(0);
        for (i, &s) in states.iter().enumerate() {
            for &a in &actions[i] {
                for &xi in support {
                    cost.push(model.cost(t, s, a, xi));
                    let (idx, d) = snap(states, model.transition(t, s, a, xi))?;
                    max_snap = max_snap.max(d);
                    next.push(idx);
                }
            }
            offsets.push(offsets[i] + actions[i].len());
        }
        Ok(Self {
            offsets,
            n_xi,
            cost,
            next,
            max_snap,
        })
    }

    fn n_actions(&self, s: usize) -> usize {
        self.offsets[s + 1] - self.offsets[s]
    }

    fn slot(&self, s: usize, a: usize) -> std::ops::Range<usize> {
        let start = (self.offsets[s] + a) * self.n_xi;
        start..start + self.n_xi
    }
}

/// Per-thread buffers for the composite evaluation.
#[derive(Default)]
pub(crate) struct Scratch {
    ys: Vec<f64>,
    order: Vec<usize>,
    sorted: Vec<f64>,
    w: Vec<f64>,
    inner: Vec<(f64, f64)>,
    iv: Vec<f64>,
    iw: Vec<f64>,
}

/// `outer_theta inner_{P_theta}[ys]` at a belief node.
pub(crate) fn composite_at(spec: &BcrSpec, node: &BeliefNode, ys: &[f64], sc: &mut Scratch) -> f64 {
    let Scratch {
        order,
        sorted,
        w,
        inner,
        iv,
        iw,
        ..
    } = sc;
    inner.clear();
    if spec.inner == RiskSpec::Expectation {
        for (lik, &tw) in node.lik.iter().zip(&node.theta_weights) {
            let v: f64 = lik.iter().zip(ys).map(|(p, y)| p * y).sum();
            inner.push((v, tw));
        }
    } else {
        order.clear();
        order.extend(0..ys.len());
        order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
        sorted.clear();
        sorted.extend(order.iter().map(|&k| ys[k]));
        for (lik, &tw) in node.lik.iter().zip(&node.theta_weights) {
            w.clear();
            w.extend(order.iter().map(|&k| lik[k]));
            inner.push((spec.inner.eval_sorted(sorted, w), tw));
        }
    }
    if inner.len() == 1 {
        return inner[0].0;
    }
    inner.sort_by(|a, b| a.0.total_cmp(&b.0));
    iv.clear();
    iw.clear();
    for &(v, w) in inner.iter() {
        iv.push(v);
        iw.push(w);
    }
    spec.outer.eval_sorted(iv, iw)
}

/// Fills `ys` with `cost + gamma V_next(next state, next node)`.
fn fill_targets(kernel: &Kernel, s: usize, a: usize, node: &BeliefNode, gamma: f64, v_next: &Table<f64>, ys: &mut Vec<f64>) {
    let slot = kernel.slot(s, a);
    ys.clear();
    for (k, i) in slot.enumerate() {
        ys.push(kernel.cost[i] + gamma * v_next.get(kernel.next[i], node.next[k]));
    }
}

/// One Bellman sweep. With `fixed` the given action is evaluated instead of
/// minimized.
pub(crate) fn sweep(
    kernel: &Kernel,
    spec: &BcrSpec,
    gamma: f64,
    layer: &BeliefLayer,
    v_next: &Table<f64>,
    fixed: Option<&Table<usize>>,
) -> (Table<f64>, Table<usize>) {
    let n_states = kernel.offsets.len() - 1;
    let n_nodes = layer.len();
    let rows: Vec<(Vec<f64>, Vec<usize>)> = (0..n_states)
        .into_par_iter()
        .map_init(Scratch::default, |sc, s| {
            let mut vals = Vec::with_capacity(n_nodes);
            let mut acts = Vec::with_capacity(n_nodes);
            for (n, node) in layer.nodes.iter().enumerate() {
                let candidates = match fixed {
                    Some(p) => {
                        let a = *p.get(s, n);
                        a..a + 1
                    }
                    None => 0..kernel.n_actions(s),
                };
                let mut best = (f64::INFINITY, 0);
                for a in candidates {
                    let mut ys = std::mem::take(&mut sc.ys);
                    fill_targets(kernel, s, a, node, gamma, v_next, &mut ys);
                    let q = composite_at(spec, node, &ys, sc);
                    sc.ys = ys;
                    if q < best.0 {
                        best = (q, a);
                    }
                }
                vals.push(best.0);
                acts.push(best.1);
            }
            (vals, acts)
        })
        .collect();
    let mut v = Table::filled(n_states, n_nodes, 0.0);
    let mut pi = Table::filled(n_states, n_nodes, 0usize);
    for (s, (vals, acts)) in rows.into_iter().enumerate() {
        for n in 0..n_nodes {
            v.set(s, n, vals[n]);
            pi.set(s, n, acts[n]);
        }
    }
    (v, pi)
}

/// Values and greedy action indices for stages `1..=T` (`values[t - 1]`);
/// the policy has an entry per decision stage `1..T`.
#[derive(Debug, Clone)]
pub struct FiniteSolution {
    pub values: Vec<Table<f64>>,
    pub policy: Vec<Table<usize>>,
    pub max_snap: f64,
}

impl FiniteSolution {
    pub fn value(&self, t: usize, s: usize, node: usize) -> f64 {
        *self.values[t - 1].get(s, node)
    }

    pub fn action_index(&self, t: usize, s: usize, node: usize) -> usize {
        *self.policy[t - 1].get(s, node)
    }
}

fn terminal_table<M: Model>(problem: &ProblemSpec<M>, n_nodes: usize) -> Table<f64> {
    Table::from_fn(problem.states.len(), n_nodes, |s, _| problem.model.terminal(problem.states[s]))
}

/// `C_t(s,a,.) + gamma V_{t+1}` under the composite risk at one augmented state.
pub fn q_value<M: Model>(
    problem: &ProblemSpec<M>,
    t: usize,
    s: usize,
    node: usize,
    a: usize,
    v_next: &Table<f64>,
    space: &BeliefSpace,
) -> Result<f64> {
    let mut ys = Vec::with_capacity(problem.support.len());
    let st = problem.states[s];
    let act = problem.actions[s][a];
    let bn = &space.layer(t).nodes[node];
    for (k, &xi) in problem.support.iter().enumerate() {
        let (ns, _) = snap(&problem.states, problem.model.transition(t, st, act, xi))?;
        ys.push(problem.model.cost(t, st, act, xi) + problem.gamma * v_next.get(ns, bn.next[k]));
    }
    Ok(composite_at(problem.risk_at(t), bn, &ys, &mut Scratch::default()))
}

/// `V_t` and `pi_t` from `V_{t+1}`; ties go to the smallest action.
pub fn bellman_stage<M: Model>(
    problem: &ProblemSpec<M>,
    t: usize,
    v_next: &Table<f64>,
    space: &BeliefSpace,
) -> Result<(Table<f64>, Table<usize>)> {
    let kernel = Kernel::build(&problem.model, t, &problem.states, &problem.actions, &problem.support)?;
    Ok(sweep(&kernel, problem.risk_at(t), problem.gamma, space.layer(t), v_next, None))
}

/// Backward induction from the terminal cost.
pub fn solve_finite<M: Model>(problem: &ProblemSpec<M>, space: &BeliefSpace) -> Result<FiniteSolution> {
    problem.validate()?;
    check_space(space, &problem.support)?;
    let horizon = problem.horizon;
    let mut values = vec![terminal_table(problem, space.layer(horizon).len())];
    let mut policy = Vec::with_capacity(horizon - 1);
    let mut max_snap: f64 = 0.0;
    for t in (1..horizon).rev() {
        let kernel = Kernel::build(&problem.model, t, &problem.states, &problem.actions, &problem.support)?;
        max_snap = max_snap.max(kernel.max_snap);
        let (v, pi) = sweep(&kernel, problem.risk_at(t), problem.gamma, space.layer(t), &values[0], None);
        values.insert(0, v);
        policy.insert(0, pi);
    }
    Ok(FiniteSolution {
        values,
        policy,
        max_snap,
    })
}

pub(crate) fn check_space(space: &BeliefSpace, support: &[f64]) -> Result<()> {
    if space.support != support {
        return Err(Error::DomainMismatch("belief space built for another observation support".into()));
    }
    Ok(())
}
