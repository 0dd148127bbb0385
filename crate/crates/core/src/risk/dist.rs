use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Tolerance on the raw weight total accepted by [`DiscreteDist::new`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Slack used when comparing a cumulative weight against a quantile level.
pub(crate) const CUM_TOL: f64 = 1e-12;

/// A finite distribution of a scalar loss: atoms sorted ascending, distinct
/// values, strictly positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteDist {
    /// Builds a distribution from `(value, weight)` pairs whose weights
    /// already sum to one (within [`WEIGHT_SUM_TOL`]).
    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        let total = checked_total(&atoms)?;
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self::assemble(atoms, total))
    }

    /// Builds a distribution from non-negative weights of any positive total.
    pub fn normalized<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        let total = checked_total(&atoms)?;
        Ok(Self::assemble(atoms, total))
    }

    /// Equal weights on the given values.
    pub fn uniform(values: &[f64]) -> Result<Self> {
        let w = 1.0 / values.len() as f64;
        Self::normalized(values.iter().map(|&v| (v, w)))
    }

    pub fn point(value: f64) -> Self {
        Self {
            values: vec![value],
            weights: vec![1.0],
        }
    }

    fn assemble(mut atoms: Vec<(f64, f64)>, total: f64) -> Self {
        atoms.retain(|&(_, w)| w > 0.0);
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        let mut values: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (v, w) in atoms {
            let w = w / total;
            match values.last() {
                Some(&last) if last == v => *weights.last_mut().unwrap() += w,
                _ => {
                    values.push(v);
                    weights.push(w);
                }
            }
        }
        Self { values, weights }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(v, w)| v * w).sum()
    }

    /// `F(x) = P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms()
            .take_while(|&(v, _)| v <= x)
            .map(|(_, w)| w)
            .sum::<f64>()
            .min(1.0)
    }

    /// Left quantile `inf { x : F(x) >= t }`; `t = 0` gives the smallest atom.
    pub fn quantile(&self, t: f64) -> f64 {
        quantile_sorted(&self.values, &self.weights, t)
    }

    /// The distribution of `X + c`.
    pub fn shift(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
            weights: self.weights.clone(),
        }
    }

    /// The distribution of `lambda * X` for `lambda >= 0`.
    pub fn scale(&self, lambda: f64) -> Self {
        assert!(lambda >= 0.0, "scale factor must be non-negative");
        if lambda == 0.0 {
            return Self::point(0.0);
        }
        Self {
            values: self.values.iter().map(|v| v * lambda).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Applies `f` to every atom, re-sorting and merging collisions.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::assemble(self.atoms().map(|(v, w)| (f(v), w)).collect(), 1.0)
    }
}

fn checked_total(atoms: &[(f64, f64)]) -> Result<f64> {
    if atoms.is_empty() {
        return Err(Error::InvalidDistribution("no atoms".into()));
    }
    let mut total = 0.0;
    for &(v, w) in atoms {
        if !v.is_finite() {
            return Err(Error::InvalidDistribution(format!("non-finite value {v}")));
        }
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidDistribution(format!("bad weight {w}")));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::InvalidDistribution("total weight is zero".into()));
    }
    Ok(total)
}

/// Left quantile over ascending values with non-negative weights of any total.
/// Zero-weight atoms never get selected.
pub(crate) fn quantile_sorted(values: &[f64], weights: &[f64], t: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    let target = t * total - CUM_TOL * total;
    let mut cum = 0.0;
    let mut last = f64::NAN;
    for (&v, &w) in values.iter().zip(weights) {
        if w <= 0.0 {
            continue;
        }
        cum += w;
        last = v;
        if cum >= target {
            return v;
        }
    }
    last
}

/// Wasserstein distance of order `p` (`p = f64::INFINITY` allowed) between
/// two one-dimensional distributions, integrated exactly over the two step
/// quantile functions.
pub fn wasserstein(a: &DiscreteDist, b: &DiscreteDist, p: f64) -> f64 {
    assert!(p >= 1.0, "order must be at least 1");
    let mut i = 0;
    let mut j = 0;
    let mut cum_a = a.weights[0];
    let mut cum_b = b.weights[0];
    let mut u = 0.0;
    let mut acc = 0.0;
    loop {
        let next = cum_a.min(cum_b);
        if next - u > 1e-15 {
            let gap = (a.values[i] - b.values[j]).abs();
            if p.is_infinite() {
                acc = f64::max(acc, gap);
            } else {
                acc += gap.powf(p) * (next - u);
            }
        }
        u = f64::max(u, next);
        let a_more = i + 1 < a.len();
        let b_more = j + 1 < b.len();
        if !a_more && !b_more {
            break;
        }
        let mut step_a = a_more && cum_a <= next + 1e-15;
        let mut step_b = b_more && cum_b <= next + 1e-15;
        if !step_a && !step_b {
            // one side is exhausted with a total a hair below the other's
            step_a = a_more;
            step_b = !a_more;
        }
        if step_a {
            i += 1;
            cum_a += a.weights[i];
        }
        if step_b {
            j += 1;
            cum_b += b.weights[j];
        }
    }
    if p.is_infinite() {
        acc
    } else {
        acc.powf(1.0 / p)
    }
}
