//! Step-wise adaptive grids over hyper-parameter space.
//!
//! Each stage is grown from the previous one in three moves: expand every
//! node by an epsilon-net of observations, merge the closest pair of
//! candidates until at most `m_max` remain, then re-insert any exact
//! candidate that ended up farther than `eps` from the merged set.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bayes::{Belief, ConjugateFamily};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    /// Observation radius `R` covered by the net.
    pub radius: f64,
    pub eps: f64,
    pub m_max: usize,
    /// Re-merge passes allowed after re-insertion before the coverage
    /// guarantee is given priority over `m_max`.
    pub max_passes: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            radius: 20.0,
            eps: 1.0,
            m_max: 20,
            max_passes: 4,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(invalid("radius", format!("{} must be positive", self.radius)));
        }
        if !(self.eps > 0.0) {
            return Err(invalid("eps", format!("{} must be positive", self.eps)));
        }
        if self.m_max == 0 {
            return Err(invalid("m_max", "must be at least 1"));
        }
        Ok(())
    }
}

/// Shape of the observation space, as far as the net is concerned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportKind {
    Binary,
    Categorical(usize),
    Lattice,
    Real,
    PositiveReal,
}

impl From<ConjugateFamily> for SupportKind {
    fn from(f: ConjugateFamily) -> Self {
        match f {
            ConjugateFamily::BetaBernoulli => SupportKind::Binary,
            ConjugateFamily::DirichletCategorical { k } => SupportKind::Categorical(k),
            ConjugateFamily::GammaPoisson => SupportKind::Lattice,
            ConjugateFamily::NormalKnownVar { .. } => SupportKind::Real,
            ConjugateFamily::GammaExponential => SupportKind::PositiveReal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridNode {
    pub hyper: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridLevel {
    pub stage: usize,
    pub nodes: Vec<GridNode>,
}

impl GridLevel {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn hypers(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.iter().map(|n| n.hyper.as_slice())
    }

    /// Index of the nearest node; ties go to the lower index.
    pub fn rep(&self, h: &[f64]) -> usize {
        nearest(self.nodes.iter().map(|n| n.hyper.as_slice()), h).0
    }

    /// Distance from `h` to the nearest node.
    pub fn projection_error(&self, h: &[f64]) -> f64 {
        nearest(self.nodes.iter().map(|n| n.hyper.as_slice()), h).1.sqrt()
    }
}

fn nearest<'a>(nodes: impl Iterator<Item = &'a [f64]>, h: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, n) in nodes.enumerate() {
        let d = dist2(n, h);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Observation points whose `eps`-balls cover the support inside radius `r`.
pub fn eps_net(r: f64, eps: f64, kind: SupportKind) -> Result<Vec<f64>> {
    if !(r > 0.0 && eps > 0.0) {
        return Err(invalid("eps_net", format!("radius {r} and eps {eps} must be positive")));
    }
    Ok(match kind {
        SupportKind::Binary => vec![0.0, 1.0],
        SupportKind::Categorical(k) => (1..=k).map(|c| c as f64).collect(),
        SupportKind::Lattice => {
            if eps < 1.0 {
                return Err(invalid("eps", format!("{eps} below the lattice spacing")));
            }
            let step = eps.floor();
            let top = r.floor();
            let mut pts: Vec<f64> = (0..)
                .map(|i| i as f64 * step)
                .take_while(|&x| x <= top)
                .collect();
            if *pts.last().unwrap() < top {
                pts.push(top);
            }
            pts
        }
        SupportKind::Real => {
            let n = (r / eps).ceil() as usize;
            let step = 2.0 * r / n as f64;
            (0..=n).map(|i| -r + i as f64 * step).collect()
        }
        SupportKind::PositiveReal => {
            let n = (r / (2.0 * eps)).ceil() as usize;
            let step = r / n as f64;
            (0..n).map(|i| (i as f64 + 0.5) * step).collect()
        }
    })
}

/// Candidate successors of every node, weighted by node weight times the
/// predictive mass of the observation.
pub fn expand(level: &GridLevel, family: ConjugateFamily, net: &[f64]) -> Result<Vec<GridNode>> {
    let mut out = Vec::with_capacity(level.len() * net.len());
    for node in &level.nodes {
        let belief = Belief::new(family, node.hyper.clone())?;
        for &xi in net {
            out.push(GridNode {
                hyper: family.successor(&node.hyper, xi),
                weight: node.weight * belief.predictive_weight(xi)?,
            });
        }
    }
    Ok(out)
}

/// Merges exact duplicates, then the closest pair (ties broken
/// lexicographically on the pair) into its weighted centroid until at most
/// `m_max` nodes remain. Output is sorted lexicographically.
pub fn cluster(candidates: Vec<GridNode>, m_max: usize) -> Vec<GridNode> {
    let mut pts: Vec<GridNode> = candidates.into_iter().filter(|c| c.weight > 0.0).collect();
    pts.sort_by(|a, b| lex(&a.hyper, &b.hyper));
    let mut dedup: Vec<GridNode> = Vec::with_capacity(pts.len());
    for p in pts {
        match dedup.last_mut() {
            Some(last) if last.hyper == p.hyper => last.weight += p.weight,
            _ => dedup.push(p),
        }
    }
    if dedup.len() <= m_max.max(1) {
        return dedup;
    }
    Merger::new(dedup).run(m_max.max(1))
}

struct Merger {
    pts: Vec<GridNode>,
    alive: Vec<bool>,
    nn: Vec<Option<(f64, usize)>>,
}

impl Merger {
    fn new(pts: Vec<GridNode>) -> Self {
        let n = pts.len();
        let mut m = Self {
            pts,
            alive: vec![true; n],
            nn: vec![None; n],
        };
        for i in 0..n {
            m.nn[i] = m.scan(i);
        }
        m
    }

    /// Total order on pairs: distance, then lexicographic smaller member,
    /// then lexicographic larger member.
    fn pair_cmp(&self, (d1, a1, b1): (f64, usize, usize), (d2, a2, b2): (f64, usize, usize)) -> Ordering {
        let order = |a: usize, b: usize| {
            if lex(&self.pts[a].hyper, &self.pts[b].hyper) == Ordering::Greater {
                (b, a)
            } else {
                (a, b)
            }
        };
        let (l1, h1) = order(a1, b1);
        let (l2, h2) = order(a2, b2);
        d1.partial_cmp(&d2)
            .unwrap_or(Ordering::Equal)
            .then_with(|| lex(&self.pts[l1].hyper, &self.pts[l2].hyper))
            .then_with(|| lex(&self.pts[h1].hyper, &self.pts[h2].hyper))
    }

    fn scan(&self, i: usize) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..self.pts.len() {
            if j == i || !self.alive[j] {
                continue;
            }
            let d = dist2(&self.pts[i].hyper, &self.pts[j].hyper);
            let better = match best {
                None => true,
                Some((bd, bj)) => self.pair_cmp((d, i, j), (bd, i, bj)) == Ordering::Less,
            };
            if better {
                best = Some((d, j));
            }
        }
        best
    }

    fn run(mut self, m_max: usize) -> Vec<GridNode> {
        let mut count = self.pts.len();
        while count > m_max {
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..self.pts.len() {
                if !self.alive[i] {
                    continue;
                }
                if let Some((d, j)) = self.nn[i] {
                    let better = match best {
                        None => true,
                        Some(b) => self.pair_cmp((d, i, j), b) == Ordering::Less,
                    };
                    if better {
                        best = Some((d, i, j));
                    }
                }
            }
            let (_, i, j) = best.expect("at least two live points");
            let (a, b) = (&self.pts[i], &self.pts[j]);
            let w = a.weight + b.weight;
            let hyper = a
                .hyper
                .iter()
                .zip(&b.hyper)
                .map(|(x, y)| (x * a.weight + y * b.weight) / w)
                .collect();
            self.alive[i] = false;
            self.alive[j] = false;
            self.pts.push(GridNode { hyper, weight: w });
            self.alive.push(true);
            self.nn.push(None);
            let k = self.pts.len() - 1;
            count -= 1;
            for p in 0..k {
                if !self.alive[p] {
                    continue;
                }
                match self.nn[p] {
                    Some((_, q)) if q == i || q == j => self.nn[p] = self.scan(p),
                    Some((d, q)) => {
                        let dk = dist2(&self.pts[p].hyper, &self.pts[k].hyper);
                        if self.pair_cmp((dk, p, k), (d, p, q)) == Ordering::Less {
                            self.nn[p] = Some((dk, k));
                        }
                    }
                    None => self.nn[p] = self.scan(p),
                }
            }
            self.nn[k] = self.scan(k);
        }
        let mut out: Vec<GridNode> = self
            .pts
            .into_iter()
            .zip(self.alive)
            .filter_map(|(p, a)| a.then_some(p))
            .collect();
        out.sort_by(|a, b| lex(&a.hyper, &b.hyper));
        out
    }
}

/// Re-inserts exact candidates farther than `eps` from the clustered set
/// (heaviest first). When that pushes the count above `m_max`, the set is
/// re-merged and checked again, up to `max_passes` times; the final state
/// always satisfies the coverage guarantee. Node weights are the total
/// weight of the exact candidates projecting onto them.
pub fn project_guarantee(
    exact: &[GridNode],
    clustered: Vec<GridNode>,
    eps: f64,
    m_max: usize,
    max_passes: usize,
) -> Result<Vec<GridNode>> {
    if clustered.is_empty() {
        return Err(Error::EmptySupport);
    }
    let eps2 = eps * eps;
    let mut nodes = clustered;
    let mut pass = 0;
    loop {
        let mut violators: Vec<&GridNode> = exact
            .iter()
            .filter(|e| nearest(nodes.iter().map(|n| n.hyper.as_slice()), &e.hyper).1 > eps2)
            .collect();
        if violators.is_empty() {
            break;
        }
        violators.sort_by(|a, b| {
            b.weight
                .partial_cmp(&a.weight)
                .unwrap_or(Ordering::Equal)
                .then_with(|| lex(&a.hyper, &b.hyper))
        });
        for v in violators {
            if nearest(nodes.iter().map(|n| n.hyper.as_slice()), &v.hyper).1 > eps2 {
                nodes.push(GridNode {
                    hyper: v.hyper.clone(),
                    weight: 0.0,
                });
            }
        }
        pass += 1;
        if nodes.len() <= m_max || pass >= max_passes {
            break;
        }
        nodes = cluster(reassign(exact, nodes), m_max);
    }
    nodes.sort_by(|a, b| lex(&a.hyper, &b.hyper));
    Ok(reassign(exact, nodes))
}

fn reassign(exact: &[GridNode], mut nodes: Vec<GridNode>) -> Vec<GridNode> {
    for n in &mut nodes {
        n.weight = 0.0;
    }
    for e in exact {
        let i = nearest(nodes.iter().map(|n| n.hyper.as_slice()), &e.hyper).0;
        nodes[i].weight += e.weight;
    }
    nodes.retain(|n| n.weight > 0.0);
    nodes
}

/// Builds stages `1..=stages`: stage 1 is the prior alone; every later stage
/// is expanded, clustered and covered, then renormalized.
pub fn build_grids(prior: &Belief, stages: usize, params: &GridParams) -> Result<Vec<GridLevel>> {
    if stages == 0 {
        return Err(invalid("stages", "at least one stage is required"));
    }
    params.validate()?;
    let family = prior.family();
    let net = eps_net(params.radius, params.eps, family.into())?;
    let mut levels = vec![GridLevel {
        stage: 1,
        nodes: vec![GridNode {
            hyper: prior.hyper().to_vec(),
            weight: 1.0,
        }],
    }];
    for stage in 2..=stages {
        let exact: Vec<GridNode> = expand(levels.last().unwrap(), family, &net)?
            .into_iter()
            .filter(|c| c.weight > 0.0)
            .collect();
        let clustered = cluster(exact.clone(), params.m_max);
        let mut nodes = project_guarantee(&exact, clustered, params.eps, params.m_max, params.max_passes)?;
        let total: f64 = nodes.iter().map(|n| n.weight).sum();
        for n in &mut nodes {
            n.weight /= total;
        }
        levels.push(GridLevel { stage, nodes });
    }
    Ok(levels)
}

/// One node per line: `tau,node_index,h_1,...,h_n,weight`.
pub fn to_text(levels: &[GridLevel]) -> String {
    let mut out = String::new();
    for level in levels {
        for (i, n) in level.nodes.iter().enumerate() {
            write!(out, "{},{}", level.stage, i).unwrap();
            for h in &n.hyper {
                write!(out, ",{h}").unwrap();
            }
            writeln!(out, ",{}", n.weight).unwrap();
        }
    }
    out
}

pub fn from_text(text: &str) -> Result<Vec<GridLevel>> {
    let mut levels: Vec<GridLevel> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            return Err(perr(format!("expected at least 4 fields, got {}", fields.len())));
        }
        let stage: usize = fields[0].parse().map_err(|e| perr(format!("stage: {e}")))?;
        let index: usize = fields[1].parse().map_err(|e| perr(format!("node index: {e}")))?;
        let nums = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| perr(format!("value `{f}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        let (weight, hyper) = nums.split_last().unwrap();
        if levels.last().is_none_or(|l| l.stage != stage) {
            levels.push(GridLevel {
                stage,
                nodes: Vec::new(),
            });
        }
        let level = levels.last_mut().unwrap();
        if index != level.nodes.len() {
            return Err(perr(format!("node index {index} out of sequence")));
        }
        level.nodes.push(GridNode {
            hyper: hyper.to_vec(),
            weight: *weight,
        });
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(h: &[f64], w: f64) -> GridNode {
        GridNode {
            hyper: h.to_vec(),
            weight: w,
        }
    }

    #[test]
    fn eps_net_examples() {
        assert_eq!(eps_net(5.0, 1.0, SupportKind::Lattice).unwrap(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(eps_net(5.0, 2.0, SupportKind::Lattice).unwrap(), vec![0.0, 2.0, 4.0, 5.0]);
        assert_eq!(eps_net(1.0, 0.5, SupportKind::Real).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(eps_net(5.0, 0.5, SupportKind::Lattice).is_err());
    }

    #[test]
    fn eps_net_covers() {
        for (r, eps) in [(7.3, 0.4), (20.0, 1.5), (3.0, 2.0)] {
            for kind in [SupportKind::Real, SupportKind::PositiveReal] {
                let net = eps_net(r, eps, kind).unwrap();
                let lo = if kind == SupportKind::Real { -r } else { 0.0 };
                for k in 0..=1000 {
                    let x = lo + (r - lo) * k as f64 / 1000.0;
                    let d = net.iter().map(|p| (p - x).abs()).fold(f64::INFINITY, f64::min);
                    assert!(d <= eps + 1e-12, "{kind:?} r={r} eps={eps} x={x}");
                }
            }
            if eps >= 1.0 {
                let net = eps_net(r, eps, SupportKind::Lattice).unwrap();
                for x in 0..=(r.floor() as i64) {
                    let d = net.iter().map(|p| (p - x as f64).abs()).fold(f64::INFINITY, f64::min);
                    assert!(d <= eps);
                }
            }
        }
    }

    #[test]
    fn expand_examples() {
        let level = GridLevel {
            stage: 1,
            nodes: vec![node(&[1.0, 1.0], 1.0)],
        };
        let c = expand(&level, ConjugateFamily::BetaBernoulli, &[0.0, 1.0]).unwrap();
        assert_eq!(c, vec![node(&[1.0, 2.0], 0.5), node(&[2.0, 1.0], 0.5)]);
        let c = expand(&level, ConjugateFamily::GammaPoisson, &[0.0, 1.0]).unwrap();
        assert_eq!(c[0].hyper, vec![1.0, 2.0]);
        assert!((c[0].weight - 0.5).abs() < 1e-14);
        assert_eq!(c[1].hyper, vec![2.0, 2.0]);
        assert!((c[1].weight - 0.25).abs() < 1e-14);
    }

    #[test]
    fn cluster_examples() {
        let merged = cluster(vec![node(&[0.0, 0.0], 1.0), node(&[2.0, 0.0], 1.0)], 1);
        assert_eq!(merged, vec![node(&[1.0, 0.0], 2.0)]);
        let merged = cluster(vec![node(&[0.0, 0.0], 3.0), node(&[2.0, 0.0], 1.0)], 1);
        assert_eq!(merged, vec![node(&[0.5, 0.0], 4.0)]);
        let few = vec![node(&[0.0, 0.0], 1.0), node(&[2.0, 0.0], 1.0)];
        assert_eq!(cluster(few.clone(), 5), few);
        // duplicates always collapse
        let dup = cluster(vec![node(&[1.0, 1.0], 1.0), node(&[1.0, 1.0], 2.0)], 5);
        assert_eq!(dup, vec![node(&[1.0, 1.0], 3.0)]);
    }

    #[test]
    fn cluster_tie_break_is_lexicographic() {
        // (0,0)-(1,0) and (5,0)-(6,0) are equally close; the pair with the
        // lexicographically smaller member merges first
        let pts = vec![node(&[5.0, 0.0], 1.0), node(&[0.0, 0.0], 1.0), node(&[6.0, 0.0], 1.0), node(&[1.0, 0.0], 1.0)];
        let out = cluster(pts, 3);
        assert_eq!(out, vec![node(&[0.5, 0.0], 2.0), node(&[5.0, 0.0], 1.0), node(&[6.0, 0.0], 1.0)]);
    }

    #[test]
    fn cluster_matches_naive_merging() {
        // oracle: recompute all pairwise distances after every merge
        fn naive(mut pts: Vec<GridNode>, m: usize) -> Vec<GridNode> {
            pts.sort_by(|a, b| lex(&a.hyper, &b.hyper));
            while pts.len() > m {
                let mut best = (f64::INFINITY, 0, 0);
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        let d = dist2(&pts[i].hyper, &pts[j].hyper);
                        if d < best.0 {
                            best = (d, i, j);
                        }
                    }
                }
                let (_, i, j) = best;
                let w = pts[i].weight + pts[j].weight;
                let h = pts[i].hyper.iter().zip(&pts[j].hyper).map(|(x, y)| (x * pts[i].weight + y * pts[j].weight) / w).collect();
                pts.remove(j);
                pts.remove(i);
                pts.push(GridNode { hyper: h, weight: w });
                pts.sort_by(|a, b| lex(&a.hyper, &b.hyper));
            }
            pts
        }
        let mut state = 12345u64;
        let mut next = || {
            state = crate::seed::splitmix64(state);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let pts: Vec<GridNode> = (0..40).map(|_| node(&[next() * 10.0, next() * 10.0], 0.1 + next())).collect();
            let a = cluster(pts.clone(), 7);
            let b = naive(pts, 7);
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                for (u, v) in x.hyper.iter().zip(&y.hyper) {
                    assert!((u - v).abs() < 1e-9);
                }
                assert!((x.weight - y.weight).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn projection_guarantee_reinserts() {
        let exact = vec![node(&[0.0, 0.0], 1.0), node(&[5.0, 5.0], 0.1)];
        let clustered = vec![node(&[0.5, 0.5], 1.1)];
        let out = project_guarantee(&exact, clustered.clone(), 1.0, 10, 4).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().any(|n| n.hyper == vec![5.0, 5.0]));
        let total: f64 = out.iter().map(|n| n.weight).sum();
        assert!((total - 1.1).abs() < 1e-12);
        let near = vec![node(&[0.0, 0.0], 1.0), node(&[1.0, 0.0], 1.0)];
        let out = project_guarantee(&near, vec![node(&[0.5, 0.0], 2.0)], 1.0, 10, 4).unwrap();
        assert_eq!(out, vec![node(&[0.5, 0.0], 2.0)]);
    }

    #[test]
    fn rep_examples() {
        let level = GridLevel {
            stage: 2,
            nodes: vec![node(&[1.0, 0.0], 0.5), node(&[2.0, 0.0], 0.5)],
        };
        assert_eq!(level.rep(&[2.0, 0.0]), 1);
        assert_eq!(level.rep(&[1.2, 0.0]), 0);
        assert_eq!(level.rep(&[1.5, 0.0]), 0);
        assert_eq!(level.projection_error(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn beta_levels_enumerate_counts() {
        let prior = Belief::beta(1.0, 1.0).unwrap();
        let params = GridParams {
            m_max: 1000,
            ..GridParams::default()
        };
        let levels = build_grids(&prior, 4, &params).unwrap();
        assert_eq!(levels.len(), 4);
        for (tau, level) in levels.iter().enumerate() {
            assert_eq!(level.len(), tau + 1);
            for n in &level.nodes {
                assert_eq!(n.hyper[0] + n.hyper[1] - 2.0, tau as f64);
            }
            let total: f64 = level.nodes.iter().map(|n| n.weight).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        let single = build_grids(&prior, 1, &params).unwrap();
        assert_eq!(single[0].nodes, vec![node(&[1.0, 1.0], 1.0)]);
    }

    #[test]
    fn gamma_levels_cover_reachable_candidates() {
        let prior = Belief::gamma_poisson(1.0, 1.0).unwrap();
        let params = GridParams {
            radius: 20.0,
            eps: 1.5,
            m_max: 10,
            max_passes: 4,
        };
        let levels = build_grids(&prior, 5, &params).unwrap();
        let net = eps_net(20.0, 1.5, SupportKind::Lattice).unwrap();
        for w in levels.windows(2) {
            let cand = expand(&w[0], ConjugateFamily::GammaPoisson, &net).unwrap();
            for c in cand {
                assert!(w[1].projection_error(&c.hyper) <= 1.5 + 1e-12);
            }
        }
        assert_eq!(levels, build_grids(&prior, 5, &params).unwrap());
    }

    #[test]
    fn text_round_trip() {
        let prior = Belief::gamma_poisson(1.0, 1.0).unwrap();
        let levels = build_grids(&prior, 3, &GridParams::default()).unwrap();
        let text = to_text(&levels);
        assert!(text.starts_with("1,0,1,1,1\n"));
        assert_eq!(from_text(&text).unwrap(), levels);
        assert!(matches!(from_text("1,0,x,1,1"), Err(Error::Parse { line: 1, .. })));
    }
}
