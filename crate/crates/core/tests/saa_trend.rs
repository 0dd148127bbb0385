use rayon::prelude::*;

use bcr::bayes::{Belief, ConjugateFamily};
use bcr::bench::spread::SpreadModel;
use bcr::bench::{iqr, median_of};
use bcr::dp::Model;
use bcr::risk::{evaluate, DiscreteDist, RiskSpec};
use bcr::saa::{var_expectation_solve, SaaConfig, StepContext};

const ACTIONS: [f64; 3] = [0.0, 4.0, 8.0];
const ALPHA: f64 = 0.6;

fn optimal_values(belief: &Belief, model: &SpreadModel, n: usize, m: usize) -> Vec<f64> {
    let zero = |_s: f64, _h: &[f64]| 0.0;
    (0..200u64)
        .into_par_iter()
        .map(|rep| {
            let ctx = StepContext {
                model,
                t: 1,
                state: 80.0,
                belief,
                actions: &ACTIONS,
                gamma: 1.0,
                continuation: &zero,
            };
            let cfg = SaaConfig {
                n,
                m,
                alpha: ALPHA,
                beta: 1.0,
                seed: rep,
            };
            var_expectation_solve(&ctx, &cfg).unwrap().value
        })
        .collect()
}

/// Outer VaR over a fine posterior quadrature of the exact inner means.
fn quadrature_value(belief: &Belief, model: &SpreadModel) -> f64 {
    let quad = belief.theta_quadrature(4000).unwrap();
    ACTIONS
        .iter()
        .map(|&a| {
            let inner = quad.iter().map(|(theta, w)| {
                let lik = ConjugateFamily::BetaBernoulli.likelihood_weights(theta.as_slice(), &[0.0, 1.0]);
                let mean = lik[0] * model.cost(1, 80.0, a, 0.0) + lik[1] * model.cost(1, 80.0, a, 1.0);
                (mean, *w)
            });
            evaluate(&DiscreteDist::normalized(inner).unwrap(), &RiskSpec::VaR { alpha: ALPHA })
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn sampled_optimum_tightens_around_quadrature_value() {
    let belief = Belief::beta(7.0, 4.0).unwrap();
    let model = SpreadModel { commission: 0.05 };
    let small = optimal_values(&belief, &model, 100, 100);
    let large = optimal_values(&belief, &model, 400, 400);
    let (iqr_small, iqr_large) = (iqr(&small), iqr(&large));
    assert!(iqr_large < 0.5 * iqr_small, "IQR {iqr_large} at 400 vs {iqr_small} at 100");
    let exact = quadrature_value(&belief, &model);
    let (err_small, err_large) = ((median_of(&small) - exact).abs(), (median_of(&large) - exact).abs());
    assert!(err_large <= iqr_large, "median off by {err_large}, IQR {iqr_large}");
    assert!(err_large <= err_small + 0.5 * iqr_small);
}
