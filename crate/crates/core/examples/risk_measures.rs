//! Law-invariant risk measures on a discrete loss and their composition.

use bcr::risk::{avar, avar_ru, composite, evaluate, var, DiscreteDist, RiskSpec};

fn main() -> bcr::Result<()> {
    let loss = DiscreteDist::new(vec![(-10.0, 0.3), (0.0, 0.4), (20.0, 0.2), (50.0, 0.1)])?;
    println!("mean          {:>8.3}", loss.mean());
    for alpha in [0.5, 0.2, 0.1] {
        println!(
            "alpha {alpha:<4}    VaR {:>8.3}  AVaR {:>8.3}  RU {:>8.3}",
            var(&loss, alpha),
            avar(&loss, alpha),
            avar_ru(&loss, alpha)
        );
    }
    for spec in [RiskSpec::Wang { nu: 2.0 }, RiskSpec::Gini { s: 0.5 }] {
        println!("{spec:?}: {:.3}", evaluate(&loss, &spec));
    }

    // outer measure over per-parameter inner values
    let inner_values = DiscreteDist::uniform(&[1.0, 2.5, 4.0, 9.0])?;
    println!("AVaR(0.25) over parameters: {:.3}", composite(&RiskSpec::avar(0.25), &inner_values));
    Ok(())
}
