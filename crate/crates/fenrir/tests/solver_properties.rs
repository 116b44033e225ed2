//! Structural properties of the probabilistic solve.

mod support;

use approx::assert_relative_eq;
use nalgebra::DVector;

use fenrir::linearize::{linearize, LinMode};
use fenrir::prior::{taylor_init, IwpPrior};
use fenrir::solver::{predict, smooth, solve_ivp, update, GaussianBelief};
use support::Logistic;

/// Manual filter loop over the public predict/update operations at an
/// explicit diffusion, for the scaling checks.
fn manual_filter(
    kappa: f64,
    nu: usize,
    grid: &[f64],
) -> (Vec<DVector<f64>>, Vec<nalgebra::DMatrix<f64>>) {
    let field = Logistic;
    let prior = IwpPrior::new(nu, 1).unwrap();
    let init = taylor_init(&field, &[], &[0.1], nu).unwrap();
    let mut belief = GaussianBelief::deterministic(init.state.clone());
    let mut means = vec![belief.mean.clone()];
    let mut covs = vec![belief.cov()];
    let mut t_prev = 0.0;
    for &t in grid {
        let tr = prior.transition(t - t_prev).unwrap();
        let (pred, _, _) = predict(&belief, &tr, kappa).unwrap();
        let y_lin = [pred.mean[0]];
        let obs = linearize(&field, &[], t, &y_lin, LinMode::Ek1, &prior).unwrap();
        let (filt, _) = update(&pred, &obs).unwrap();
        means.push(filt.mean.clone());
        covs.push(filt.cov());
        belief = filt;
        t_prev = t;
    }
    (means, covs)
}

#[test]
fn diffusion_scale_propagates_linearly_through_the_filter() {
    let grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.025).collect();
    let kappa = 0.7;
    let scale = 10.0;
    let (m1, c1) = manual_filter(kappa, 2, &grid);
    let (m2, c2) = manual_filter(kappa * scale, 2, &grid);
    for (a, b) in m1.iter().zip(&m2) {
        let rel = (a - b).amax() / a.amax().max(1e-300);
        assert!(rel <= 1e-12, "means differ by rel {rel:.2e}");
    }
    for (a, b) in c1.iter().zip(&c2) {
        let diff = (&(a * scale) - b).amax();
        let denom = b.amax().max(1e-300);
        assert!(diff / denom <= 1e-10, "covariances off by rel {:.2e}", diff / denom);
    }
}

#[test]
fn convergence_order_of_the_ek1_solve() {
    // Logistic equation, ν = 3: errors must shrink at least quadratically
    // per halving (the observed rate is close to h^ν).
    let field = Logistic;
    let truth = fenrir::rk::rk_solve(&field, &[], &[0.1], (0.0, 2.0), 1e-12, 1e-12).unwrap();
    let prior = IwpPrior::new(3, 1).unwrap();
    let init = taylor_init(&field, &[], &[0.1], 3).unwrap();
    let mut errors = Vec::new();
    for &dt in &[0.1_f64, 0.05, 0.025] {
        let n = (2.0 / dt).round() as usize;
        let grid: Vec<f64> = (1..=n).map(|i| i as f64 * dt).collect();
        let (chain, _) = solve_ivp(&field, &[], &prior, &init, 0.0, &grid, LinMode::Ek1).unwrap();
        let marginals = smooth(&chain);
        let mut max_err = 0.0_f64;
        for (node, belief) in marginals.iter().enumerate() {
            let e = (belief.mean[0] - truth.eval(chain.times[node])[0]).abs();
            max_err = max_err.max(e);
        }
        errors.push(max_err);
    }
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!(
            ratio.log2() >= 2.0,
            "error ratio {ratio:.2} too small (errors {errors:?})"
        );
    }
}

#[test]
fn ek0_and_ek1_both_track_the_logistic_solution() {
    let field = Logistic;
    let truth = fenrir::rk::rk_solve(&field, &[], &[0.1], (0.0, 1.0), 1e-12, 1e-12).unwrap();
    let prior = IwpPrior::new(2, 1).unwrap();
    let init = taylor_init(&field, &[], &[0.1], 2).unwrap();
    let grid: Vec<f64> = (1..=200).map(|i| i as f64 * 0.005).collect();
    for mode in [LinMode::Ek0, LinMode::Ek1] {
        let (chain, diag) = solve_ivp(&field, &[], &prior, &init, 0.0, &grid, mode).unwrap();
        assert!(diag.residual_norms.iter().all(|v| v.is_finite()));
        assert!(diag.min_innovation_scale.is_finite());
        let terminal = chain.terminal_mean[0];
        let expect = truth.eval(1.0)[0];
        assert!(
            (terminal - expect).abs() <= 1e-5,
            "{mode:?}: {terminal} vs {expect}"
        );
    }
}

#[test]
fn chain_shape_invariants() {
    let field = Logistic;
    let prior = IwpPrior::new(2, 1).unwrap();
    let init = taylor_init(&field, &[], &[0.1], 2).unwrap();
    let grid: Vec<f64> = (1..=17).map(|i| i as f64 * 0.05).collect();
    let (chain, diag) = solve_ivp(&field, &[], &prior, &init, 0.0, &grid, LinMode::Ek1).unwrap();
    assert_eq!(chain.len(), 18);
    assert_eq!(chain.step_count(), 17);
    assert_eq!(chain.gains.len(), 17);
    assert_eq!(chain.offsets.len(), 17);
    assert_eq!(chain.noise_sqrts.len(), 17);
    assert_eq!(diag.steps, 17);
    assert_eq!(chain.kappa_applied, 1.0);
    // Node-0 kernel is degenerate: exact initial state.
    assert_eq!(chain.gains[0].amax(), 0.0);
    assert_eq!(chain.noise_sqrts[0].amax(), 0.0);
    assert_relative_eq!(chain.offsets[0], init.state);
}
