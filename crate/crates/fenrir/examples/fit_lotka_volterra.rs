//! One full estimation run on the predator-prey benchmark: noisy data,
//! random initialisation, staged fit, trajectory error.
//!
//! Run with: cargo run --release --example fit_lotka_volterra

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fenrir::bench::generate_data;
use fenrir::estimate::{fit, init_params, trmse, FenrirObjective, FitOptions};
use fenrir::linearize::LinMode;
use fenrir::models;

fn main() -> fenrir::Result<()> {
    let problem = models::lotka_volterra();
    let obs = generate_data(&problem, problem.sigma2_low, 3)?;
    let objective = FenrirObjective::new(&problem, &obs, 5, LinMode::Ek1, None)?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = init_params(&problem.space, Some(&obs), &mut rng);
    println!("random start:");
    for (def, v) in problem.space.defs.iter().zip(&start) {
        println!("  {:>8} = {v:.4}", def.name);
    }

    let out = fit(
        &objective,
        &problem.space,
        &start,
        problem.schedule,
        &FitOptions::default(),
        3,
    );
    println!(
        "\nfit finished: {} iterations of trace, {} objective evaluations, status {:?}",
        out.trace.len(),
        out.n_evals,
        out.status
    );
    println!("stage boundaries at trace indices {:?}", out.stage_bounds);

    let truth = problem.truth_for_errors(problem.sigma2_low);
    println!("\n{:>8} {:>12} {:>12}", "param", "estimate", "truth");
    for (i, def) in problem.space.defs.iter().enumerate() {
        match truth[i] {
            Some(t) => println!("{:>8} {:>12.5} {:>12.5}", def.name, out.params[i], t),
            None => println!("{:>8} {:>12.5} {:>12}", def.name, out.params[i], "-"),
        }
    }
    println!("\nnegative log-likelihood: {:.4}", out.nll);
    println!("trajectory RMSE: {:.5}", trmse(&problem, &problem.space, &out.params));
    Ok(())
}
