//! Value iteration on the known-demand inventory problem against the
//! base-stock closed form.

use bcr::bench::inventory::{InventoryConfig, InventoryModelKind};
use bcr::risk::RiskSpec;
use bcr::vi::{stop_threshold, Operator};

fn main() -> bcr::Result<()> {
    let cfg = InventoryConfig::default();
    let problem = cfg.problem(cfg.risk(InventoryModelKind::Standard));
    let space = cfg.dirac_space(cfg.theta_c)?;
    let eps = 0.01;
    let res = Operator::new(&problem, &space)?.value_iterate(eps, 10_000)?;
    let bs = cfg.base_stock(cfg.theta_c);
    let star = bs.s_star()?;
    println!(
        "kappa {:.2}  s* {star}  iterations {}  stop threshold {:.2e}",
        bs.kappa(),
        res.iterations,
        stop_threshold(eps, cfg.gamma)
    );
    for (i, &s) in problem.states.iter().enumerate().filter(|(_, &s)| (0.0..=star).contains(&s)) {
        println!(
            "s {s:>5}  VI {:>10.5}  closed form {:>10.5}  order {}",
            res.values.get(i, 0),
            bs.value(&RiskSpec::Expectation, s)?,
            problem.actions[i][*res.policy.get(i, 0)]
        );
    }
    Ok(())
}
