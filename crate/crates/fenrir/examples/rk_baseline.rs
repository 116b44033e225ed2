//! The classical baseline: non-linear least squares against an adaptive
//! Runge--Kutta solution of the same system.
//!
//! Run with: cargo run --release --example rk_baseline

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fenrir::bench::generate_data;
use fenrir::estimate::{fit, init_params, trmse, FitOptions, RkObjective, Schedule};
use fenrir::models;

fn main() -> fenrir::Result<()> {
    let problem = models::lotka_volterra();
    let obs = generate_data(&problem, problem.sigma2_low, 21)?;

    let objective = RkObjective::new(&problem, &obs);
    let space = objective.space().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let start = init_params(&space, Some(&obs), &mut rng);
    let out = fit(&objective, &space, &start, Schedule::JointOnly, &FitOptions::default(), 21);

    println!("sum-of-squares fit on {} observations", obs.len());
    println!("{:>8} {:>12} {:>12}", "param", "estimate", "truth");
    let truth = problem.truth_for_errors(problem.sigma2_low);
    for (i, def) in space.defs.iter().enumerate() {
        let t = problem
            .space
            .index_of(&def.name)
            .and_then(|fi| truth[fi])
            .map(|v| format!("{v:.5}"))
            .unwrap_or_else(|| "-".into());
        println!("{:>8} {:>12.5} {:>12}", def.name, out.params[i], t);
    }
    println!("\nfinal loss {:.6}, status {:?}", out.nll, out.status);
    println!("trajectory RMSE: {:.5}", trmse(&problem, &space, &out.params));
    Ok(())
}
