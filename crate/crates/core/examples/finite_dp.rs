//! Backward induction under a composite risk measure versus known parameters.

use bcr::bayes::{Belief, ConjugateFamily, Theta};
use bcr::dp::{solve_finite, BeliefSpace, FnModel, ProblemSpec};
use bcr::grid::{build_grids, GridParams};
use bcr::risk::{BcrSpec, RiskSpec};

fn main() -> bcr::Result<()> {
    let support = [0.0, 1.0];
    let problem = |risk: BcrSpec| ProblemSpec {
        model: FnModel {
            cost: |_t: usize, _s: f64, a: f64, xi: f64| if xi == 1.0 { -0.95 * a } else { a },
            transition: |_t: usize, s: f64, _a: f64, _xi: f64| s,
            terminal: |_s: f64| 0.0,
        },
        states: vec![0.0],
        actions: vec![vec![0.0, 1.0]],
        gamma: 1.0,
        horizon: 6,
        risk: vec![risk],
        support: support.to_vec(),
    };

    let prior = Belief::beta(4.0, 3.0)?;
    let levels = build_grids(&prior, 6, &GridParams::default())?;
    let learning = BeliefSpace::adaptive(ConjugateFamily::BetaBernoulli, &levels, &support, 32)?;
    let known = BeliefSpace::dirac(ConjugateFamily::BetaBernoulli, Theta::scalar(4.0 / 7.0), &support)?;

    for (name, risk) in [
        ("E-E", BcrSpec::expectation()),
        ("VaR-E", BcrSpec::new(RiskSpec::var(0.6), RiskSpec::Expectation)?),
        ("AVaR-AVaR", BcrSpec::new(RiskSpec::avar(0.6), RiskSpec::avar(0.8))?),
    ] {
        let bayes = solve_finite(&problem(risk.clone()), &learning)?;
        let plug_in = solve_finite(&problem(risk), &known)?;
        println!(
            "{name:<10} learning V1 {:>8.4}  first bet {}   plug-in V1 {:>8.4}",
            bayes.value(1, 0, 0),
            bayes.action_index(1, 0, 0),
            plug_in.value(1, 0, 0)
        );
    }
    Ok(())
}
