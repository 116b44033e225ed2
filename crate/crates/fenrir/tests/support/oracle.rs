//! Dense joint-Gaussian oracle.
//!
//! Materialises the backward chain as one stacked Gaussian over all nodes by
//! affine pushforward, then computes likelihoods and posteriors by direct
//! dense conditioning. Cubic in the problem size; test scale only.

use nalgebra::{DMatrix, DVector};

use fenrir::regression::{align_to_grid, ObservationSet};
use fenrir::solver::BackwardMarkovChain;

/// Joint Gaussian over all chain nodes (stacked state vectors).
pub struct DenseGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub node_dim: usize,
}

/// Exact joint of the backward chain at diffusion `kappa`:
/// `x_N ~ N(ξ, κΛ)`, `x_n = G_n x_{n+1} + ζ_n + w_n`, `w_n ~ N(0, κP_n)`.
pub fn densify(chain: &BackwardMarkovChain, kappa: f64) -> DenseGaussian {
    let nodes = chain.len();
    assert!(nodes <= 64, "oracle is for test-scale chains");
    let dd = chain.state_dim;
    let total = nodes * dd;
    let scale = kappa / chain.kappa_applied;

    let mut mean = DVector::zeros(total);
    let mut cov = DMatrix::zeros(total, total);

    let last = nodes - 1;
    mean.rows_mut(last * dd, dd).copy_from(&chain.terminal_mean);
    let term_cov = &chain.terminal_cov_sqrt * chain.terminal_cov_sqrt.transpose() * scale;
    cov.view_mut((last * dd, last * dd), (dd, dd)).copy_from(&term_cov);

    for n in (0..last).rev() {
        let g = &chain.gains[n];
        // Mean: ζ_n + G_n m_{n+1}.
        let next_mean = mean.rows((n + 1) * dd, dd).clone_owned();
        let m_n = &chain.offsets[n] + g * next_mean;
        mean.rows_mut(n * dd, dd).copy_from(&m_n);
        // Cross blocks against every later node.
        for j in (n + 1)..nodes {
            let c_next_j = cov.view(((n + 1) * dd, j * dd), (dd, dd)).clone_owned();
            let c_nj = g * c_next_j;
            cov.view_mut((n * dd, j * dd), (dd, dd)).copy_from(&c_nj);
            cov.view_mut((j * dd, n * dd), (dd, dd)).copy_from(&c_nj.transpose());
        }
        // Own block.
        let c_next = cov.view(((n + 1) * dd, (n + 1) * dd), (dd, dd)).clone_owned();
        let p = &chain.noise_sqrts[n] * chain.noise_sqrts[n].transpose() * scale;
        let c_nn = g * c_next * g.transpose() + p;
        cov.view_mut((n * dd, n * dd), (dd, dd)).copy_from(&c_nn);
    }
    DenseGaussian {
        mean,
        cov,
        node_dim: dd,
    }
}

pub struct DenseConditioning {
    pub nll: f64,
    /// Posterior marginal (mean, covariance) per chain node.
    pub marginals: Vec<(DVector<f64>, DMatrix<f64>)>,
}

/// Direct evaluation of the measurement likelihood and Gaussian posterior.
pub fn dense_condition(
    joint: &DenseGaussian,
    obs: &ObservationSet,
    chain_times: &[f64],
    r: &DMatrix<f64>,
) -> DenseConditioning {
    let dd = joint.node_dim;
    let nodes = chain_times.len();
    assert!(joint.mean.len() == nodes * dd);
    assert!(nodes * dd <= 512);
    let k = obs.obs_dim();
    let d = obs.h.ncols();
    let node_of_obs = align_to_grid(&obs.times, chain_times).unwrap();

    let n_obs = obs.len();
    let total_obs = n_obs * k;
    // Projection matrix u = P x + v over the stacked state.
    let mut proj = DMatrix::zeros(total_obs, nodes * dd);
    let mut u_stack = DVector::zeros(total_obs);
    for (i, &node) in node_of_obs.iter().enumerate() {
        for r_i in 0..k {
            for c in 0..d {
                proj[(i * k + r_i, node * dd + c)] = obs.h[(r_i, c)];
            }
        }
        u_stack.rows_mut(i * k, k).copy_from(&obs.values[i]);
    }

    let mut s = &proj * &joint.cov * proj.transpose();
    for i in 0..n_obs {
        for a in 0..k {
            for b in 0..k {
                s[(i * k + a, i * k + b)] += r[(a, b)];
            }
        }
    }
    let resid = &u_stack - &proj * &joint.mean;
    let chol = s.clone().cholesky().expect("oracle innovation must be PD");
    let ln_det = 2.0 * (0..total_obs).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>();
    let alpha = chol.solve(&resid);
    let nll = 0.5
        * (total_obs as f64 * (2.0 * std::f64::consts::PI).ln() + ln_det + resid.dot(&alpha));

    // Posterior over the full stack.
    let cross = &joint.cov * proj.transpose();
    let mean_post = &joint.mean + &cross * &alpha;
    let cov_post = &joint.cov - &cross * chol.solve(&cross.transpose());

    let marginals = (0..nodes)
        .map(|n| {
            (
                mean_post.rows(n * dd, dd).clone_owned(),
                cov_post.view((n * dd, n * dd), (dd, dd)).clone_owned(),
            )
        })
        .collect();
    DenseConditioning { nll, marginals }
}
