//! The recursive likelihood and posterior against dense brute force.

mod support;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use fenrir::linearize::LinMode;
use fenrir::prior::{taylor_init, IwpPrior};
use fenrir::regression::{fenrir_nll, fenrir_posterior, ObservationSet};
use fenrir::solver::{smooth, solve_ivp};
use support::oracle::{dense_condition, densify};

#[test]
fn densify_single_node_is_terminal_distribution() {
    let case = support::random_linear_case(&mut ChaCha8Rng::seed_from_u64(1), 1, 1);
    let prior = IwpPrior::new(1, 1).unwrap();
    let init = taylor_init(&case.field, &[], &case.y0, 1).unwrap();
    let (chain, _) = solve_ivp(&case.field, &[], &prior, &init, 0.0, &case.grid, LinMode::Ek1).unwrap();
    let kappa = 2.5;
    let joint = densify(&chain, kappa);
    let dd = chain.state_dim;
    let last = chain.len() - 1;
    assert_relative_eq!(
        joint.mean.rows(last * dd, dd).clone_owned(),
        chain.terminal_mean,
        epsilon = 1e-12
    );
    let term = &chain.terminal_cov_sqrt * chain.terminal_cov_sqrt.transpose() * kappa;
    assert_relative_eq!(
        joint.cov.view((last * dd, last * dd), (dd, dd)).clone_owned(),
        term,
        epsilon = 1e-12
    );
}

#[test]
fn densify_marginals_match_smoother() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let case = support::random_linear_case(&mut rng, 2, 8);
    let prior = IwpPrior::new(2, 2).unwrap();
    let init = taylor_init(&case.field, &[], &case.y0, 2).unwrap();
    let (chain, _) = solve_ivp(&case.field, &[], &prior, &init, 0.0, &case.grid, LinMode::Ek1).unwrap();
    let joint = densify(&chain, 1.0);
    let marginals = smooth(&chain);
    let dd = chain.state_dim;
    for (n, belief) in marginals.iter().enumerate() {
        let m = joint.mean.rows(n * dd, dd).clone_owned();
        assert!((m - &belief.mean).amax() <= 1e-9);
        let c = joint.cov.view((n * dd, n * dd), (dd, dd)).clone_owned();
        assert!((c - belief.cov()).amax() <= 1e-9);
    }
}

#[test]
fn zero_gain_chain_is_block_diagonal() {
    // With all gains zeroed the joint decouples across nodes.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let case = support::random_linear_case(&mut rng, 1, 4);
    let prior = IwpPrior::new(1, 1).unwrap();
    let init = taylor_init(&case.field, &[], &case.y0, 1).unwrap();
    let (mut chain, _) =
        solve_ivp(&case.field, &[], &prior, &init, 0.0, &case.grid, LinMode::Ek1).unwrap();
    for g in chain.gains.iter_mut() {
        g.fill(0.0);
    }
    let joint = densify(&chain, 1.0);
    let dd = chain.state_dim;
    for i in 0..chain.len() {
        for j in 0..chain.len() {
            if i != j {
                let blk = joint.cov.view((i * dd, j * dd), (dd, dd));
                assert_eq!(blk.amax(), 0.0);
            }
        }
    }
}

#[test]
fn single_observation_nll_matches_one_term_gaussian() {
    let case = support::random_linear_case(&mut ChaCha8Rng::seed_from_u64(11), 2, 6);
    let prior = IwpPrior::new(2, 2).unwrap();
    let init = taylor_init(&case.field, &[], &case.y0, 2).unwrap();
    let (chain, _) = solve_ivp(&case.field, &[], &prior, &init, 0.0, &case.grid, LinMode::Ek1).unwrap();

    let t_last = *chain.times.last().unwrap();
    let u = DVector::from_column_slice(&[0.3]);
    let h = DMatrix::from_row_slice(1, 2, &[1.0, -0.5]);
    let r = DMatrix::identity(1, 1) * 0.04;
    let obs = ObservationSet::new(vec![t_last], vec![u.clone()], h.clone(), r.clone()).unwrap();

    let kappa = case.kappa;
    let nll = fenrir_nll(&chain, &obs, kappa, &r).unwrap();

    // By hand: u ~ N(H E₀ᵀ ξ_N, H E₀ᵀ (κΛ) E₀ H ᵀ + R).
    let d = 2;
    let mean = &h * chain.terminal_mean.rows(0, d);
    let lam = &chain.terminal_cov_sqrt * chain.terminal_cov_sqrt.transpose() * kappa;
    let var = (&h * lam.view((0, 0), (d, d)) * h.transpose())[(0, 0)] + r[(0, 0)];
    let e = u[0] - mean[0];
    let direct = 0.5 * ((2.0 * std::f64::consts::PI).ln() + var.ln() + e * e / var);
    assert_relative_eq!(nll, direct, max_relative = 1e-10);
}

#[test]
fn oracle_equivalence_on_random_linear_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240229);
    let started = std::time::Instant::now();
    for trial in 0..50 {
        let d = rng.random_range(1..=2usize);
        let nu = rng.random_range(1..=2usize);
        let n_nodes = rng.random_range(3..=14usize);
        let case = support::random_linear_case(&mut rng, d, n_nodes);

        let prior = IwpPrior::new(nu, d).unwrap();
        let init = taylor_init(&case.field, &[], &case.y0, nu).unwrap();
        let (chain, _) =
            solve_ivp(&case.field, &[], &prior, &init, 0.0, &case.grid, LinMode::Ek1).unwrap();

        let r = case.obs.noise.clone();
        let nll = fenrir_nll(&chain, &case.obs, case.kappa, &r).unwrap();
        let post = fenrir_posterior(&chain, &case.obs, case.kappa, &r).unwrap();

        let joint = densify(&chain, case.kappa);
        let oracle = dense_condition(&joint, &case.obs, &chain.times, &r);

        let rel = (nll - oracle.nll).abs() / oracle.nll.abs().max(1.0);
        assert!(
            rel <= 1e-7,
            "trial {trial}: nll {nll} vs oracle {} (rel {rel:.2e})",
            oracle.nll
        );

        let mean_scale = oracle
            .marginals
            .iter()
            .map(|(m, _)| m.amax())
            .fold(1.0_f64, f64::max);
        let cov_scale = oracle
            .marginals
            .iter()
            .map(|(_, c)| c.amax())
            .fold(1e-12_f64, f64::max);
        for (n, (m_oracle, c_oracle)) in oracle.marginals.iter().enumerate() {
            let dm = (&post.means[n] - m_oracle).amax();
            assert!(
                dm <= 1e-7 * mean_scale,
                "trial {trial} node {n}: mean diff {dm:.3e} (scale {mean_scale:.3e})"
            );
            let c = &post.cov_sqrts[n] * post.cov_sqrts[n].transpose();
            let dc = (&c - c_oracle).amax();
            assert!(
                dc <= 1e-7 * cov_scale,
                "trial {trial} node {n}: cov diff {dc:.3e} (scale {cov_scale:.3e})"
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "oracle sweep took {elapsed:?}");
}

#[test]
fn large_noise_reduces_to_noise_normalisers() {
    // With R huge the prior contribution is negligible: the NLL approaches
    // the sum of log-normalisers of N(u; H ξ, R).
    let case = support::random_linear_case(&mut ChaCha8Rng::seed_from_u64(5), 2, 8);
    let prior = IwpPrior::new(1, 2).unwrap();
    let init = taylor_init(&case.field, &[], &case.y0, 1).unwrap();
    let (chain, _) = solve_ivp(&case.field, &[], &prior, &init, 0.0, &case.grid, LinMode::Ek1).unwrap();
    let k = case.obs.obs_dim();
    let r = DMatrix::identity(k, k) * 1e9;
    let nll = fenrir_nll(&chain, &case.obs, 1.0, &r).unwrap();

    let marginals = smooth(&chain);
    let node_of_obs = fenrir::regression::align_to_grid(&case.obs.times, &chain.times).unwrap();
    let d = case.field.l.nrows();
    let mut direct = 0.0;
    for (i, &node) in node_of_obs.iter().enumerate() {
        let mean = &case.obs.h * marginals[node].mean.rows(0, d);
        let e = &case.obs.values[i] - mean;
        for row in 0..k {
            direct +=
                0.5 * ((2.0 * std::f64::consts::PI * 1e9).ln() + e[row] * e[row] / 1e9);
        }
    }
    assert!((nll - direct).abs() <= 1e-3, "nll {nll} direct {direct}");
}
