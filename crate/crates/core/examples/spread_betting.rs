//! Spread betting comparison across history sizes.

use bcr::bench::spread::{run_spread_betting, SpreadBettingConfig};

fn main() -> bcr::Result<()> {
    let cfg = SpreadBettingConfig {
        hist_levels: Vec::new(),
        ..SpreadBettingConfig::default()
    };
    let report = run_spread_betting(&cfg)?;
    print!("{}", report.summary_csv(true).render());
    Ok(())
}
