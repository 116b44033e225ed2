//! Estimation with partially observed states: only the infected and
//! recovered fractions of an SEIR epidemic are measured, from day 30 on,
//! yet rates and the unobserved initial exposure are recovered.
//!
//! Run with: cargo run --release --example partial_observation_seir

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fenrir::bench::generate_data;
use fenrir::estimate::{fit, init_params, FenrirObjective, FitOptions};
use fenrir::linearize::LinMode;
use fenrir::models;

fn main() -> fenrir::Result<()> {
    let problem = models::seir();
    println!(
        "measurement matrix ({}x{}): only I and R are observed",
        problem.obs_matrix.nrows(),
        problem.obs_matrix.ncols()
    );
    let obs = generate_data(&problem, problem.sigma2_low, 5)?;
    println!(
        "data: {} observations on t in [{}, {}]\n",
        obs.len(),
        obs.times.first().unwrap(),
        obs.times.last().unwrap()
    );

    let objective = FenrirObjective::new(&problem, &obs, 5, LinMode::Ek1, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = init_params(&problem.space, Some(&obs), &mut rng);
    let out = fit(
        &objective,
        &problem.space,
        &start,
        problem.schedule,
        &FitOptions::default(),
        5,
    );

    let truth = problem.truth_for_errors(problem.sigma2_low);
    println!("{:>8} {:>12} {:>12} {:>12}", "param", "start", "estimate", "truth");
    for (i, def) in problem.space.defs.iter().enumerate() {
        let t = truth[i].map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into());
        println!(
            "{:>8} {:>12.5} {:>12.5} {:>12}",
            def.name, start[i], out.params[i], t
        );
    }
    println!("\nstatus: {:?}, NLL {:.2}", out.status, out.nll);
    Ok(())
}
