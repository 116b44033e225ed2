//! Solve an initial value problem with the probabilistic solver and compare
//! the posterior mean against a tight Runge--Kutta reference.
//!
//! Run with: cargo run --release --example probabilistic_solve

use fenrir::linearize::LinMode;
use fenrir::models;
use fenrir::prior::{taylor_init, IwpPrior};
use fenrir::solver::{smooth, solve_ivp};

fn main() -> fenrir::Result<()> {
    let problem = models::lotka_volterra();
    let nu = 4;
    let prior = IwpPrior::new(nu, 2)?;
    let theta = &problem.ode_params_true;
    let y0 = problem.true_y0();

    // Exact initial derivatives by Taylor-mode differentiation.
    let init = taylor_init(problem.field.as_ref(), theta, y0.as_slice(), nu)?;
    println!("initial state (stacked derivatives):");
    for m in 0..=nu {
        let block: Vec<f64> = (0..2).map(|j| init.state[m * 2 + j]).collect();
        println!("  d^{m}/dt^{m} y(0) = {block:?}");
    }

    let dt = 0.01;
    let grid: Vec<f64> = (1..=200).map(|i| i as f64 * dt).collect();
    let (chain, diagnostics) = solve_ivp(
        problem.field.as_ref(),
        theta,
        &prior,
        &init,
        0.0,
        &grid,
        LinMode::Ek1,
    )?;
    println!(
        "\nsolved {} nodes; max information residual {:.2e}",
        chain.len(),
        diagnostics
            .residual_norms
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max)
    );

    let reference = fenrir::rk::rk_solve(
        problem.field.as_ref(),
        theta,
        y0.as_slice(),
        (0.0, 2.0),
        1e-12,
        1e-10,
    )?;
    let marginals = smooth(&chain);
    let mut max_err = 0.0_f64;
    for (node, belief) in marginals.iter().enumerate() {
        let truth = reference.eval(chain.times[node]);
        max_err = max_err.max((belief.mean[0] - truth[0]).abs());
        max_err = max_err.max((belief.mean[1] - truth[1]).abs());
    }
    println!("max |posterior mean - reference| over the grid: {max_err:.2e}");
    println!(
        "posterior standard deviations at t = 2 (unit diffusion): [{:.2e}, {:.2e}]",
        marginals.last().unwrap().marginal_std(0),
        marginals.last().unwrap().marginal_std(1),
    );
    Ok(())
}
