//! One sampled decision step: VaR-expectation and AVaR-AVaR objectives.

use bcr::bayes::Belief;
use bcr::bench::spread::SpreadModel;
use bcr::saa::{avar_avar_solve, sample_size_hint, var_expectation_solve, SaaConfig, StepContext};

fn main() -> bcr::Result<()> {
    let belief = Belief::beta(7.0, 4.0)?;
    let model = SpreadModel { commission: 0.05 };
    let zero = |_s: f64, _h: &[f64]| 0.0;
    let actions = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
    let ctx = StepContext {
        model: &model,
        t: 1,
        state: 80.0,
        belief: &belief,
        actions: &actions,
        gamma: 1.0,
        continuation: &zero,
    };
    let cfg = SaaConfig {
        n: 200,
        m: 200,
        alpha: 0.6,
        beta: 0.8,
        seed: 1,
    };
    let ve = var_expectation_solve(&ctx, &cfg)?;
    let cc = avar_avar_solve(&ctx, &cfg)?;
    println!("VaR-E      stake {:>4}  value {:>8.4}", ve.action, ve.value);
    println!("AVaR-AVaR  stake {:>4}  value {:>8.4}", cc.action, cc.value);
    let hint = sample_size_hint(10.0, 1.0, 1, 0.1, 0.05, 1.0)?;
    println!("N0 = {:.0}; {}", hint.n0, hint.m0_formula);
    Ok(())
}
