//! Fast oscillations: where least-squares against a numerical solution gets
//! trapped, the physics-enhanced likelihood first inflates its diffusion to
//! interpolate the data and then walks to the true length parameter.
//!
//! Run with: cargo run --release --example pendulum_oscillations

use fenrir::bench::{generate_data, pendulum_fit_from};
use fenrir::estimate::Method;
use fenrir::linearize::LinMode;
use fenrir::models;

fn main() -> fenrir::Result<()> {
    let problem = models::pendulum();
    let obs = generate_data(&problem, problem.sigma2_low, 1)?;
    println!(
        "pendulum: {} velocity observations, sigma^2 = {}, true L = 1",
        obs.len(),
        problem.sigma2_low
    );

    for method in [Method::Fenrir, Method::Rk] {
        let (out, space) = pendulum_fit_from(&obs, 5.0, method, false, 5, LinMode::Ek1, 1)?;
        let l_hat = out.params[space.index_of("L").unwrap()];
        println!(
            "{method:>7}: L0 = 5.0  ->  L = {l_hat:.4}   (objective {:.3}, status {})",
            out.nll,
            out.status
        );
        if method == Method::Fenrir {
            let ik = space.index_of("kappa").unwrap();
            let is = space.index_of("sigma2").unwrap();
            println!(
                "         fitted diffusion kappa = {:.3e}, noise sigma^2 = {:.4}",
                out.params[ik], out.params[is]
            );
        }
    }
    Ok(())
}
