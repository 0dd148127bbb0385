//! Posterior updates, predictive laws and parameter quadrature.

use bcr::bayes::{Belief, TruncationRule};

fn main() -> bcr::Result<()> {
    let prior = Belief::gamma_poisson(1.0, 1.0)?;
    let posterior = prior.update_batch(&[9.0, 12.0, 8.0, 11.0])?;
    let m = posterior.posterior_moments();
    println!("hyper {:?}  mean {:.3}  variance {:.3}", posterior.hyper(), m.mean[0], m.variance[0]);

    let support = posterior.predictive_support(&TruncationRule::default())?;
    println!(
        "predictive support: {} atoms, truncated tail mass {:.2e}",
        support.dist.len(),
        support.tail_mass
    );
    println!("P(xi = 10) = {:.4}", posterior.predictive_weight(10.0)?);

    for (theta, w) in posterior.theta_quadrature(5)? {
        println!("theta {:>7.3}  weight {:.3}", theta.value(), w);
    }
    Ok(())
}
