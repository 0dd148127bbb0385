//! Convergence of the learned value function to the known-demand one.

use bcr::bench::inventory::{run_inventory, InventoryConfig};
use bcr::bench::{iqr, median_of};

fn main() -> bcr::Result<()> {
    let cfg = InventoryConfig {
        theta_grid: Vec::new(),
        replications: 5,
        ..InventoryConfig::default()
    };
    let report = run_inventory(&cfg)?;
    for &variant in &cfg.variants {
        for &t in &cfg.checkpoints {
            let gaps = report.gaps_for(variant, t);
            println!("{:>14} t={t:<4} median {:>10.4} iqr {:>10.4}", variant.tag(), median_of(&gaps), iqr(&gaps));
        }
    }
    Ok(())
}
