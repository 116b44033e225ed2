//! The marginal likelihood as a function of the hyperparameters.
//!
//! One probabilistic solve produces the physics-enhanced prior; evaluating
//! the likelihood at new (σ², κ) then costs only a Kalman pass over the
//! flipped time axis, no re-solving.
//!
//! Run with: cargo run --release --example marginal_likelihood

use fenrir::bench::generate_data;
use fenrir::estimate::{FenrirObjective, Objective};
use fenrir::linearize::LinMode;
use fenrir::models;

fn main() -> fenrir::Result<()> {
    let problem = models::lotka_volterra();
    let obs = generate_data(&problem, problem.sigma2_low, 7)?;
    let objective = FenrirObjective::new(&problem, &obs, 5, LinMode::Ek1, None)?;

    // Natural parameter vector at the truth; only σ² varies below.
    let mut natural: Vec<f64> = Vec::new();
    natural.extend_from_slice(&problem.init_params_true);
    natural.extend_from_slice(&problem.ode_params_true);
    natural.push(problem.sigma2_low);
    natural.push(1.0);

    let is = problem.space.index_of("sigma2").unwrap();
    println!("negative log marginal likelihood at the true dynamics:");
    println!("{:>12}  {:>12}", "sigma^2", "NLL");
    for exp10 in [-4.0, -3.0, -2.0, -1.5, -1.0, 0.0, 1.0] {
        let mut nat = natural.clone();
        nat[is] = 10f64.powf(exp10);
        let w = problem.space.to_unconstrained(&nat);
        println!("{:>12.4}  {:>12.4}", nat[is], objective.eval(&w));
    }
    println!("(the data were generated at sigma^2 = {})", problem.sigma2_low);

    // A wrong dynamics parameter shifts the whole curve up.
    let ia = problem.space.index_of("alpha").unwrap();
    let mut wrong = natural.clone();
    wrong[ia] *= 1.5;
    let w_true = problem.space.to_unconstrained(&natural);
    let w_wrong = problem.space.to_unconstrained(&wrong);
    println!(
        "\nNLL at truth: {:.3}, at alpha x 1.5: {:.3}",
        objective.eval(&w_true),
        objective.eval(&w_wrong)
    );
    Ok(())
}
