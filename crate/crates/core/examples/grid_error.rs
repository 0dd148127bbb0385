//! Projection error of the adaptive grids against the theoretical bound.

use bcr::bench::grid_error::{run_grid_error, GridErrorConfig};

fn main() -> bcr::Result<()> {
    let report = run_grid_error(&GridErrorConfig::default())?;
    println!("eps  mmax  nodes  median  max_in_radius  bound  exceed");
    for c in &report.cells {
        println!(
            "{:<4} {:<5} {:<6} {:<7.3} {:<14.3} {:<6} {:.4}",
            c.eps, c.m_max, c.grid_size, c.median_delta, c.max_delta_in_radius, c.bound, c.exceedance_rate
        );
    }
    Ok(())
}
