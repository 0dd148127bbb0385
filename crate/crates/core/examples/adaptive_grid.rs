//! Adaptive hyper-parameter grids for a Gamma-Poisson belief.

use bcr::bayes::Belief;
use bcr::grid::{build_grids, to_text, GridParams};

fn main() -> bcr::Result<()> {
    let prior = Belief::gamma_poisson(1.0, 1.0)?;
    let params = GridParams {
        radius: 20.0,
        eps: 2.0,
        m_max: 10,
        max_passes: 4,
    };
    let levels = build_grids(&prior, 5, &params)?;
    for level in &levels {
        println!("stage {}: {} nodes", level.stage, level.len());
    }
    let h = [1.0 + 43.0, 1.0 + 4.0];
    let last = levels.last().unwrap();
    println!("projection of {h:?}: node {} at distance {:.3}", last.rep(&h), last.projection_error(&h));
    print!("{}", to_text(&levels[..2]));
    Ok(())
}
