//! Gauss--Markov regression against the physics-enhanced prior.
//!
//! The solver chain specifies the latent process by a terminal distribution
//! and backward transition kernels, so data conditioning runs as a forward
//! Kalman filter over the flipped time axis: start from the terminal node,
//! update where observations exist, and step towards t₀ with the stored
//! kernels. The marginal likelihood falls out of the prediction error
//! decomposition; a second (forward-in-time) smoothing pass produces the
//! posterior trajectory marginals.
//!
//! The printed form of the flipped-axis prediction step in the source
//! material mixes its time indices; the recursion implemented here is the
//! one consistent with the backward kernels themselves:
//! `μ̆(t_{n−1}⁺) = G_{n−1} μ̆(t_n) + ζ_{n−1}`,
//! `Σ̆(t_{n−1}⁺) = G_{n−1} Σ̆(t_n) G_{n−1}ᵀ + κ P_{n−1}`.
//!
//! κ and the measurement noise R enter only here: the chain's unit-diffusion
//! factors are scaled by √κ on the fly, so re-evaluating the likelihood at
//! new (κ, R) does not require re-running the solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, LN_2PI};
use crate::solver::BackwardMarkovChain;

/// Measurements `u(t) = H·y(t) + v`, `v ~ N(0, R)`, on times that must lie
/// on the solver grid.
#[derive(Clone, Debug)]
pub struct ObservationSet {
    pub times: Vec<f64>,
    pub values: Vec<DVector<f64>>,
    /// Measurement matrix (k×d), mapping the ODE state to the observation.
    pub h: DMatrix<f64>,
    /// Noise covariance the data was generated with (k×k).
    pub noise: DMatrix<f64>,
}

impl ObservationSet {
    pub fn new(
        times: Vec<f64>,
        values: Vec<DVector<f64>>,
        h: DMatrix<f64>,
        noise: DMatrix<f64>,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observation times but {} values",
                times.len(),
                values.len()
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(
                    "observation times must be strictly increasing".into(),
                ));
            }
        }
        let k = h.nrows();
        if noise.nrows() != k || noise.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "noise covariance is {}x{}, expected {k}x{k}",
                noise.nrows(),
                noise.ncols()
            )));
        }
        for v in &values {
            if v.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "observation has dimension {}, measurement matrix has {k} rows",
                    v.len()
                )));
            }
        }
        if (&noise - noise.transpose()).amax() > 1e-12 * (1.0 + noise.amax()) {
            return Err(Error::InvalidArgument("noise covariance must be symmetric".into()));
        }
        Ok(ObservationSet {
            times,
            values,
            h,
            noise,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Map each observation time to its solver-grid node, within tolerance.
pub fn align_to_grid(obs_times: &[f64], grid: &[f64]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(obs_times.len());
    for &t in obs_times {
        let tol = 1e-9 * t.abs().max(1.0);
        let idx = match grid.binary_search_by(|g| g.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => {
                // Nearest of the two neighbours.
                let mut best = None;
                if i < grid.len() && (grid[i] - t).abs() <= tol {
                    best = Some(i);
                }
                if i > 0 && (grid[i - 1] - t).abs() <= tol {
                    best = Some(i - 1);
                }
                best.ok_or(Error::TimeNotOnGrid { t })?
            }
        };
        out.push(idx);
    }
    Ok(out)
}

/// Posterior summary of one regression pass.
#[derive(Clone, Debug)]
pub struct RegressionResult {
    pub nll: f64,
    /// Smoothed state means, one per chain node.
    pub means: Vec<DVector<f64>>,
    /// Lower factors of the smoothed covariances, one per chain node.
    pub cov_sqrts: Vec<DMatrix<f64>>,
    /// Innovation residuals per observation, in observation order.
    pub residuals: Vec<DVector<f64>>,
    /// Lower factors of the innovation covariances per observation.
    pub innovation_sqrts: Vec<DMatrix<f64>>,
}

struct FlipPass {
    nll: f64,
    /// Post-update moments at every node.
    filtered_means: Vec<DVector<f64>>,
    filtered_sqrts: Vec<DMatrix<f64>>,
    /// Predicted mean at node n−1 (before its update), per step.
    predicted_means: Vec<DVector<f64>>,
    /// Smoother gain Ğ_n and noise factor P̆_n½, per step (indexed by the
    /// upper node n of the step n ↔ n−1).
    smoother_gains: Vec<DMatrix<f64>>,
    smoother_noise_sqrts: Vec<DMatrix<f64>>,
    residuals: Vec<DVector<f64>>,
    innovation_sqrts: Vec<DMatrix<f64>>,
}

fn noise_sqrt_factor(noise: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if noise.amax() == 0.0 {
        return Ok(DMatrix::zeros(noise.nrows(), noise.ncols()));
    }
    if let Some(l) = linalg::cholesky_lower(noise) {
        return Ok(l);
    }
    // Singular but PSD: symmetric eigen route with clamped eigenvalues.
    let eig = noise.clone().symmetric_eigen();
    let mut min = f64::INFINITY;
    for v in eig.eigenvalues.iter() {
        min = min.min(*v);
    }
    if min < -1e-10 * noise.amax() {
        return Err(Error::InvalidArgument(
            "noise covariance is not positive semidefinite".into(),
        ));
    }
    let mut m = eig.eigenvectors.clone();
    for c in 0..m.ncols() {
        let s = eig.eigenvalues[c].max(0.0).sqrt();
        for r in 0..m.nrows() {
            m[(r, c)] *= s;
        }
    }
    Ok(linalg::lower_factor(&m))
}

/// The shared flipped-time filter. When `keep` is false only the likelihood
/// accumulators are maintained.
fn flip_filter(
    chain: &BackwardMarkovChain,
    obs: &ObservationSet,
    kappa: f64,
    r: &DMatrix<f64>,
    keep: bool,
) -> Result<FlipPass> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!("diffusion must be positive, got {kappa}")));
    }
    let k = obs.obs_dim();
    let d = chain.ode_dim;
    let dd = chain.state_dim;
    if obs.h.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "measurement matrix has {} columns, ODE dimension is {d}",
            obs.h.ncols()
        )));
    }
    if r.nrows() != k || r.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "noise covariance is {}x{}, expected {k}x{k}",
            r.nrows(),
            r.ncols()
        )));
    }
    let node_of_obs = align_to_grid(&obs.times, &chain.times)?;
    let r_sqrt = noise_sqrt_factor(r)?;
    let sqrt_kappa = (kappa / chain.kappa_applied).sqrt();

    let n_nodes = chain.len();
    let mut obs_at_node: Vec<Option<usize>> = vec![None; n_nodes];
    for (oi, &node) in node_of_obs.iter().enumerate() {
        if obs_at_node[node].is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate observation at t = {}",
                obs.times[oi]
            )));
        }
        obs_at_node[node] = Some(oi);
    }

    let mut mean = chain.terminal_mean.clone();
    let mut fact = &chain.terminal_cov_sqrt * sqrt_kappa;

    let mut nll = 0.0;
    let mut pass = FlipPass {
        nll: 0.0,
        filtered_means: Vec::new(),
        filtered_sqrts: Vec::new(),
        predicted_means: Vec::new(),
        smoother_gains: Vec::new(),
        smoother_noise_sqrts: Vec::new(),
        residuals: Vec::new(),
        innovation_sqrts: Vec::new(),
    };
    if keep {
        pass.filtered_means = vec![DVector::zeros(dd); n_nodes];
        pass.filtered_sqrts = vec![DMatrix::zeros(dd, dd); n_nodes];
        pass.predicted_means = vec![DVector::zeros(dd); n_nodes];
        pass.smoother_gains = vec![DMatrix::zeros(dd, dd); n_nodes];
        pass.smoother_noise_sqrts = vec![DMatrix::zeros(dd, dd); n_nodes];
        pass.residuals = vec![DVector::zeros(k); obs.len()];
        pass.innovation_sqrts = vec![DMatrix::zeros(k, k); obs.len()];
    }

    let mut work_upd = DMatrix::zeros(k + dd, k + dd);
    let mut work_pred = DMatrix::zeros(2 * dd, dd);
    let mut ht_l = DMatrix::zeros(k, dd);
    let mut gl = DMatrix::zeros(dd, dd);

    for node in (0..n_nodes).rev() {
        if let Some(oi) = obs_at_node[node] {
            // H̆ᵀ = H·E₀ᵀ acts on the first d state rows only.
            ht_l.gemm(1.0, &obs.h, &fact.view((0, 0), (d, dd)), 0.0);
            let mut residual = obs.values[oi].clone();
            residual.gemv(-1.0, &obs.h, &mean.rows(0, d), 1.0);

            let (x, y, z) = measurement_update(&r_sqrt, &ht_l, &fact, &mut work_upd, k, dd)?;
            // Prediction error decomposition term.
            let ln_det_half: f64 = {
                let mut acc = 0.0;
                for i in 0..k {
                    let piv = x[(i, i)];
                    if piv <= 0.0 {
                        return Err(Error::NotPositiveDefinite { min_diag: piv });
                    }
                    acc += piv.ln();
                }
                acc
            };
            let mut w = residual.clone();
            linalg::solve_lower_in_place(&x, &mut w);
            nll += 0.5 * (k as f64) * LN_2PI + ln_det_half + 0.5 * w.norm_squared();

            let mut gain = y;
            linalg::solve_right_lower_guarded(&mut gain, &x, 1e-14);
            mean.gemv(1.0, &gain, &residual, 1.0);
            fact = z;
            if keep {
                pass.residuals[oi] = residual;
                pass.innovation_sqrts[oi] = x;
            }
        }
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("regression state".into()));
        }
        if keep {
            pass.filtered_means[node] = mean.clone();
            pass.filtered_sqrts[node] = fact.clone();
        }
        if node > 0 {
            let s = node - 1;
            let g = &chain.gains[s];
            gl.gemm(1.0, g, &fact, 0.0);
            let mut next_mean = chain.offsets[s].clone();
            next_mean.gemv(1.0, g, &mean, 1.0);

            if keep {
                // The predicted covariance of a Dirac-constrained chain can
                // be numerically rank deficient, which makes the smoother
                // gain ill-posed for a plain triangular factor: roundoff
                // pivots contaminate well-determined columns during the back
                // substitution. A column-pivoted factorisation orders those
                // junk pivots last, where the guarded solve zeroes them
                // harmlessly (pseudo-inverse semantics).
                work_pred.fill(0.0);
                work_pred.view_mut((0, 0), (dd, dd)).tr_copy_from(&gl);
                {
                    let mut nview = work_pred.view_mut((dd, 0), (dd, dd));
                    for r_i in 0..dd {
                        for c_i in 0..dd {
                            nview[(r_i, c_i)] = sqrt_kappa * chain.noise_sqrts[s][(c_i, r_i)];
                        }
                    }
                }
                let perm = linalg::qr_r_pivoted_in_place(&mut work_pred);
                let r_fac = work_pred.view((0, 0), (dd, dd)).clone_owned();
                // Predicted factor with rows scattered back to state order.
                let mut l_pred = DMatrix::zeros(dd, dd);
                for j in 0..dd {
                    for i in 0..dd {
                        l_pred[(perm[i], j)] = r_fac[(j, i)];
                    }
                }
                // Ğ = Σ̆Gᵀ (Σ̆⁺)⁻¹ with Σ̆Gᵀ = L̆(GL̆)ᵀ.
                let mut cross = DMatrix::zeros(dd, dd);
                cross.gemm(1.0, &fact, &gl.transpose(), 0.0);
                let sg = linalg::solve_right_gram_pivoted(&cross, &r_fac, &perm, 1e-13);
                // P̆ in Joseph form, (I−ĞG)Σ̆(I−ĞG)ᵀ + κĞPĞᵀ: exact under
                // pseudo-inverse gains and insensitive to the rank of the
                // predicted covariance.
                let mut left = fact.clone();
                left.gemm(-1.0, &sg, &gl, 1.0);
                let mut right = DMatrix::zeros(dd, dd);
                right.gemm(sqrt_kappa, &sg, &chain.noise_sqrts[s], 0.0);
                let mut joseph = DMatrix::zeros(2 * dd, dd);
                joseph.view_mut((0, 0), (dd, dd)).tr_copy_from(&left);
                joseph.view_mut((dd, 0), (dd, dd)).tr_copy_from(&right);
                linalg::qr_r_in_place(&mut joseph);
                normalize_signs(&mut joseph);
                let mut pn = DMatrix::zeros(dd, dd);
                for c in 0..dd {
                    for r_i in c..dd {
                        pn[(r_i, c)] = joseph[(c, r_i)];
                    }
                }
                pass.smoother_gains[node] = sg;
                pass.smoother_noise_sqrts[node] = pn;
                pass.predicted_means[s] = next_mean.clone();
                fact = l_pred;
            } else {
                work_pred.fill(0.0);
                work_pred.view_mut((0, 0), (dd, dd)).tr_copy_from(&gl);
                {
                    let mut nview = work_pred.view_mut((dd, 0), (dd, dd));
                    for r_i in 0..dd {
                        for c_i in 0..dd {
                            nview[(r_i, c_i)] = sqrt_kappa * chain.noise_sqrts[s][(c_i, r_i)];
                        }
                    }
                }
                linalg::qr_r_in_place(&mut work_pred);
                normalize_signs(&mut work_pred);
                for c in 0..dd {
                    for r_i in 0..dd {
                        fact[(r_i, c)] = if r_i >= c { work_pred[(c, r_i)] } else { 0.0 };
                    }
                }
            }
            mean = next_mean;
        }
    }
    if !nll.is_finite() {
        return Err(Error::NonFinite("negative log-likelihood".into()));
    }
    pass.nll = nll;
    Ok(pass)
}

fn normalize_signs(r: &mut DMatrix<f64>) {
    let n = r.nrows().min(r.ncols());
    for row in 0..n {
        if r[(row, row)] < 0.0 {
            for c in row..r.ncols() {
                r[(row, c)] = -r[(row, c)];
            }
        }
    }
}

/// Data update with measurement noise, with one-shot jitter on a singular
/// innovation.
fn measurement_update(
    r_sqrt: &DMatrix<f64>,
    ht_l: &DMatrix<f64>,
    fact: &DMatrix<f64>,
    work: &mut DMatrix<f64>,
    k: usize,
    dd: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let run = |r_fac: &DMatrix<f64>, work: &mut DMatrix<f64>| {
        work.fill(0.0);
        work.view_mut((0, 0), (k, k)).tr_copy_from(r_fac);
        work.view_mut((k, 0), (dd, k)).tr_copy_from(ht_l);
        work.view_mut((k, k), (dd, dd)).tr_copy_from(fact);
        linalg::qr_r_in_place(work);
        normalize_signs(work);
        let mut x = DMatrix::zeros(k, k);
        let mut y = DMatrix::zeros(dd, k);
        let mut z = DMatrix::zeros(dd, dd);
        for c in 0..k {
            for r_i in 0..k {
                x[(r_i, c)] = if r_i >= c { work[(c, r_i)] } else { 0.0 };
            }
            for r_i in 0..dd {
                y[(r_i, c)] = work[(c, k + r_i)];
            }
        }
        for c in 0..dd {
            for r_i in c..dd {
                z[(r_i, c)] = work[(k + c, k + r_i)];
            }
        }
        (x, y, z)
    };
    let (x, y, z) = run(r_sqrt, work);
    let max_piv = (0..k).map(|i| x[(i, i)]).fold(0.0_f64, f64::max);
    let min_piv = (0..k).map(|i| x[(i, i)]).fold(f64::INFINITY, f64::min);
    if min_piv > 1e-13 * max_piv && min_piv > 0.0 {
        return Ok((x, y, z));
    }
    let trace_s: f64 = (0..k).map(|i| x.row(i).norm_squared()).sum();
    let jitter = (1e-12 * trace_s / k as f64).sqrt();
    if jitter <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_diag: min_piv });
    }
    let mut r_aug = r_sqrt.clone();
    for i in 0..k {
        // Augmenting the factor this way adds jitter·I to S.
        r_aug[(i, i)] = (r_aug[(i, i)] * r_aug[(i, i)] + jitter * jitter).sqrt();
    }
    let (x, y, z) = run(&r_aug, work);
    if (0..k).any(|i| x[(i, i)] <= 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_diag: (0..k).map(|i| x[(i, i)]).fold(f64::INFINITY, f64::min),
        });
    }
    Ok((x, y, z))
}

/// Negative log marginal likelihood of the observations under the chain,
/// by the prediction error decomposition of the flipped-time filter.
pub fn fenrir_nll(
    chain: &BackwardMarkovChain,
    obs: &ObservationSet,
    kappa: f64,
    r: &DMatrix<f64>,
) -> Result<f64> {
    if obs.is_empty() {
        return Ok(0.0);
    }
    Ok(flip_filter(chain, obs, kappa, r, false)?.nll)
}

/// Full regression pass: likelihood plus smoothed posterior marginals.
pub fn fenrir_posterior(
    chain: &BackwardMarkovChain,
    obs: &ObservationSet,
    kappa: f64,
    r: &DMatrix<f64>,
) -> Result<RegressionResult> {
    let pass = flip_filter(chain, obs, kappa, r, true)?;
    let n_nodes = chain.len();
    let dd = chain.state_dim;

    // Forward smoothing: start at node 0 (the last one filtered) and fold
    // the flipped-filter information back up the time axis.
    let mut means = vec![DVector::zeros(dd); n_nodes];
    let mut cov_sqrts = vec![DMatrix::zeros(dd, dd); n_nodes];
    means[0] = pass.filtered_means[0].clone();
    cov_sqrts[0] = pass.filtered_sqrts[0].clone();
    let mut work = DMatrix::zeros(2 * dd, dd);
    for n in 1..n_nodes {
        let sg = &pass.smoother_gains[n];
        let mut m = pass.filtered_means[n].clone();
        let innov = &means[n - 1] - &pass.predicted_means[n - 1];
        m.gemv(1.0, sg, &innov, 1.0);
        means[n] = m;
        let gl = sg * &cov_sqrts[n - 1];
        work.fill(0.0);
        work.view_mut((0, 0), (dd, dd)).tr_copy_from(&gl);
        work.view_mut((dd, 0), (dd, dd))
            .tr_copy_from(&pass.smoother_noise_sqrts[n]);
        linalg::qr_r_in_place(&mut work);
        normalize_signs(&mut work);
        let mut l = DMatrix::zeros(dd, dd);
        for c in 0..dd {
            for r_i in c..dd {
                l[(r_i, c)] = work[(c, r_i)];
            }
        }
        cov_sqrts[n] = l;
    }

    Ok(RegressionResult {
        nll: pass.nll,
        means,
        cov_sqrts,
        residuals: pass.residuals,
        innovation_sqrts: pass.innovation_sqrts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearize::LinMode;
    use crate::models;
    use crate::prior::{taylor_init, IwpPrior};
    use crate::solver::{smooth, solve_ivp};
    use approx::assert_relative_eq;

    fn decay_chain(n: usize) -> BackwardMarkovChain {
        let field = models::ScalarLinear { lambda_index: 0 };
        let prior = IwpPrior::new(2, 1).unwrap();
        let init = taylor_init(&field, &[-1.0], &[1.0], 2).unwrap();
        let grid: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        solve_ivp(&field, &[-1.0], &prior, &init, 0.0, &grid, LinMode::Ek1)
            .unwrap()
            .0
    }

    #[test]
    fn empty_observation_set_has_zero_nll() {
        let chain = decay_chain(10);
        let obs = ObservationSet::new(
            vec![],
            vec![],
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1) * 0.1,
        )
        .unwrap();
        assert_eq!(fenrir_nll(&chain, &obs, 1.0, &obs.noise.clone()).unwrap(), 0.0);
    }

    #[test]
    fn single_terminal_observation_matches_direct_gaussian() {
        let chain = decay_chain(10);
        let kappa = 0.7;
        let sigma2 = 0.05;
        let u = 0.42;
        let obs = ObservationSet::new(
            vec![1.0],
            vec![DVector::from_column_slice(&[u])],
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1) * sigma2,
        )
        .unwrap();
        let nll = fenrir_nll(&chain, &obs, kappa, &obs.noise).unwrap();

        let mean = chain.terminal_mean[0];
        let var = kappa * chain.terminal_cov_sqrt.row(0).norm_squared() + sigma2;
        let direct = 0.5 * (LN_2PI + var.ln() + (u - mean) * (u - mean) / var);
        assert_relative_eq!(nll, direct, max_relative = 1e-12);
    }

    #[test]
    fn huge_noise_leaves_posterior_at_prior() {
        let chain = decay_chain(20);
        let times: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let values = times.iter().map(|_| DVector::from_column_slice(&[0.0])).collect();
        let obs = ObservationSet::new(
            times,
            values,
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1) * 1e12,
        )
        .unwrap();
        let kappa = 2.0;
        let post = fenrir_posterior(&chain, &obs, kappa, &obs.noise).unwrap();
        let prior_marginals = smooth(&chain);
        for (node, belief) in prior_marginals.iter().enumerate() {
            let diff = (&post.means[node] - &belief.mean).norm();
            assert!(
                diff <= 1e-4 * belief.mean.norm().max(1.0),
                "node {node}: diff {diff}"
            );
        }
    }

    #[test]
    fn near_noiseless_observation_on_every_node_interpolates() {
        let chain = decay_chain(20);
        let times: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let values: Vec<DVector<f64>> = times
            .iter()
            .map(|&t| DVector::from_column_slice(&[(-t).exp() + 1e-3 * (31.0 * t).sin()]))
            .collect();
        let obs = ObservationSet::new(
            times.clone(),
            values.clone(),
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1) * 1e-10,
        )
        .unwrap();
        // A diffusion large enough that the prior does not fight the data.
        let post = fenrir_posterior(&chain, &obs, 1e3, &obs.noise).unwrap();
        for (i, v) in values.iter().enumerate() {
            let node = align_to_grid(&[times[i]], &chain.times).unwrap()[0];
            assert!(
                (post.means[node][0] - v[0]).abs() <= 1e-4,
                "node {node}: {} vs {}",
                post.means[node][0],
                v[0]
            );
        }
    }

    #[test]
    fn nll_is_bitwise_deterministic() {
        let chain = decay_chain(15);
        let times: Vec<f64> = (1..=5).map(|i| i as f64 * 0.2).collect();
        let values = times
            .iter()
            .map(|&t| DVector::from_column_slice(&[(-t).exp() + 0.01]))
            .collect();
        let obs = ObservationSet::new(
            times,
            values,
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1) * 0.01,
        )
        .unwrap();
        let a = fenrir_nll(&chain, &obs, 0.3, &obs.noise).unwrap();
        let b = fenrir_nll(&chain, &obs, 0.3, &obs.noise).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn off_grid_observation_is_rejected() {
        let chain = decay_chain(10);
        let obs = ObservationSet::new(
            vec![0.123456],
            vec![DVector::from_column_slice(&[0.5])],
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1) * 0.01,
        )
        .unwrap();
        match fenrir_nll(&chain, &obs, 1.0, &obs.noise) {
            Err(Error::TimeNotOnGrid { .. }) => {}
            other => panic!("expected grid error, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_noise_and_diffusion_error_out() {
        let chain = decay_chain(10);
        let obs = ObservationSet::new(
            vec![0.5],
            vec![DVector::from_column_slice(&[0.5])],
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert!(fenrir_nll(&chain, &obs, 0.0, &obs.noise).is_err());
    }
}
