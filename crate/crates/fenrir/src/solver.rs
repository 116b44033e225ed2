//! Probabilistic IVP solver.
//!
//! A forward Kalman pass conditions the integrated Wiener prior on the ODE
//! information operator at every grid node (Dirac data, zero measurement
//! noise). The pass is run once at unit diffusion; because the initial
//! covariance is zero and all updates are noise-free, means are independent
//! of the diffusion κ and covariances scale linearly in it, so κ can be
//! applied analytically when the result is consumed.
//!
//! The output is not the filtered trajectory but the backward Gauss--Markov
//! representation of the numerical posterior: terminal moments plus one
//! reverse-time kernel `x_n | x_{n+1} ~ N(G_n x_{n+1} + ζ_n, κ P_n)` per
//! step. That chain is the physics-enhanced prior consumed by the
//! regression layer.
//!
//! All covariance algebra is done in square-root form, and each step runs in
//! the step-size rescaled coordinates of the prior, where transition and
//! noise matrices are well conditioned even for ν = 5 at small steps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::linearize::{linearize, AffineObservation, LinMode, VectorField};
use crate::prior::{InitialState, IwpPrior, Transition};

/// Gaussian state belief with covariance held as a lower-triangular factor.
#[derive(Clone, Debug)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    /// Lower-triangular `L` with covariance `Σ = L·Lᵀ`.
    pub cov_sqrt: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn deterministic(mean: DVector<f64>) -> Self {
        let n = mean.len();
        GaussianBelief {
            mean,
            cov_sqrt: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov(&self) -> DMatrix<f64> {
        &self.cov_sqrt * self.cov_sqrt.transpose()
    }

    /// Standard deviation of component `i` (row norm of the factor).
    pub fn marginal_std(&self, i: usize) -> f64 {
        self.cov_sqrt.row(i).norm()
    }
}

/// Backward Gauss--Markov representation of the solver posterior.
///
/// Node 0 is the initial time; its kernel is degenerate (`G = 0`, `P = 0`,
/// `ζ = x†`) because the initial state is exact. `gains`, `offsets` and
/// `noise_sqrts` have one entry per step, i.e. `times.len() - 1`.
#[derive(Clone, Debug)]
pub struct BackwardMarkovChain {
    pub times: Vec<f64>,
    pub terminal_mean: DVector<f64>,
    pub terminal_cov_sqrt: DMatrix<f64>,
    /// `G_n` of the kernel from node n+1 down to node n.
    pub gains: Vec<DMatrix<f64>>,
    /// `ζ_n = μ_n − G_n μ⁻_{n+1}`.
    pub offsets: Vec<DVector<f64>>,
    /// Lower factors of the kernel noises `P_n` (unit diffusion).
    pub noise_sqrts: Vec<DMatrix<f64>>,
    /// Diffusion scale the stored covariance factors correspond to.
    pub kappa_applied: f64,
    pub state_dim: usize,
    pub ode_dim: usize,
}

impl BackwardMarkovChain {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn step_count(&self) -> usize {
        self.times.len() - 1
    }
}

/// Numerical health record of one solve.
#[derive(Clone, Debug)]
pub struct SolveDiagnostics {
    /// `‖e_n‖₂` of the information residual at every node.
    pub residual_norms: Vec<f64>,
    /// Smallest Cholesky pivot of any innovation covariance encountered.
    pub min_innovation_scale: f64,
    pub steps: usize,
    /// Updates that needed the pseudo-inverse fallback.
    pub guarded_updates: usize,
}

/// One prediction step `x⁺ ~ N(Φμ, ΦΣΦᵀ + κQ)` in square-root form.
///
/// Returns the predicted belief together with the backward-kernel gain
/// `G = ΣΦᵀ(Σ⁺)⁻¹` and noise factor of `P = Σ − GΣ⁺Gᵀ`.
pub fn predict(
    belief: &GaussianBelief,
    trans: &Transition,
    kappa: f64,
) -> Result<(GaussianBelief, DMatrix<f64>, DMatrix<f64>)> {
    let d = belief.dim();
    if trans.phi.nrows() != d {
        return Err(Error::DimensionMismatch(format!(
            "transition is {}x{}, state dimension is {d}",
            trans.phi.nrows(),
            trans.phi.ncols()
        )));
    }
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative diffusion {kappa}")));
    }
    let noise_sqrt = &trans.noise_sqrt * kappa.sqrt();
    let phi_l = &trans.phi * &belief.cov_sqrt;
    let mut work = DMatrix::zeros(2 * d, 2 * d);
    let (x, y, z) = backward_array(&phi_l, &noise_sqrt, &belief.cov_sqrt, &mut work);
    let mut gain = y;
    let guarded = linalg::solve_right_lower_guarded(&mut gain, &x, GAIN_GUARD_REL);
    let z = if guarded {
        // Rank-deficient prediction: the array reading of P½ is unreliable,
        // fall back to the Joseph stack (I−GΦ)L | √κ G Q½.
        let mut left = belief.cov_sqrt.clone();
        left.gemm(-1.0, &gain, &phi_l, 1.0);
        let right = &gain * &noise_sqrt;
        let mut stack = DMatrix::zeros(d, 2 * d);
        stack.view_mut((0, 0), (d, d)).copy_from(&left);
        stack.view_mut((0, d), (d, d)).copy_from(&right);
        linalg::lower_factor(&stack)
    } else {
        z
    };
    let mean = &trans.phi * &belief.mean;
    Ok((
        GaussianBelief {
            mean,
            cov_sqrt: x,
        },
        gain,
        z,
    ))
}

/// Condition a predicted belief on the Dirac information `Cᵀx = b`.
///
/// Returns the filtered belief and the residual `e = b − Cᵀμ⁻`. A singular
/// innovation gets one shot of jitter `1e-12·tr(S)/d`; if that still fails
/// the gain falls back to the pseudo-inverse.
pub fn update(
    predicted: &GaussianBelief,
    obs: &AffineObservation,
) -> Result<(GaussianBelief, DVector<f64>)> {
    let d = obs.ct.nrows();
    let dd = predicted.dim();
    if obs.ct.ncols() != dd {
        return Err(Error::DimensionMismatch(format!(
            "observation acts on dimension {}, state has {dd}",
            obs.ct.ncols()
        )));
    }
    let mut work = DMatrix::zeros(d + dd, d + dd);
    let ct_l = &obs.ct * &predicted.cov_sqrt;
    let residual = &obs.offset - &obs.ct * &predicted.mean;
    let out = dirac_update(&predicted.mean, &predicted.cov_sqrt, &ct_l, &residual, &mut work)?;
    Ok((
        GaussianBelief {
            mean: out.mean,
            cov_sqrt: out.cov_sqrt,
        },
        residual,
    ))
}

pub(crate) struct UpdateOutcome {
    pub mean: DVector<f64>,
    pub cov_sqrt: DMatrix<f64>,
    pub innovation_sqrt: DMatrix<f64>,
    pub guarded: bool,
}

/// Relative pivot threshold for gain solves in well-scaled coordinates.
const GAIN_GUARD_REL: f64 = 1e-12;

/// Zero-noise measurement update in square-root form, shared by the public
/// [`update`] and the solver loop. `ct_l = Cᵀ·L⁻` must be precomputed.
pub(crate) fn dirac_update(
    mean_pred: &DVector<f64>,
    l_pred: &DMatrix<f64>,
    ct_l: &DMatrix<f64>,
    residual: &DVector<f64>,
    work: &mut DMatrix<f64>,
) -> Result<UpdateOutcome> {
    let d = ct_l.nrows();
    let (x, y, z) = measurement_array(None, ct_l, l_pred, work);

    // Singular innovation: retry once with jitter, then guard.
    let max_piv = (0..d).map(|i| x[(i, i)]).fold(0.0_f64, f64::max);
    let min_piv = (0..d).map(|i| x[(i, i)]).fold(f64::INFINITY, f64::min);
    let (x, y, z, guarded) = if min_piv <= 1e-13 * max_piv {
        let trace_s: f64 = (0..d).map(|i| x.row(i).norm_squared()).sum();
        let jitter = (1e-12 * trace_s / d as f64).sqrt();
        let r_sqrt = DMatrix::identity(d, d) * jitter;
        let (x2, y2, z2) = measurement_array(Some(&r_sqrt), ct_l, l_pred, work);
        let still_singular = (0..d).any(|i| x2[(i, i)] <= 0.0);
        (x2, y2, z2, still_singular)
    } else {
        (x, y, z, false)
    };

    let mut gain = y;
    let fired = linalg::solve_right_lower_guarded(&mut gain, &x, 1e-14);
    let mut mean = mean_pred.clone();
    mean.gemv(1.0, &gain, residual, 1.0);
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("filtered mean".into()));
    }
    Ok(UpdateOutcome {
        mean,
        cov_sqrt: z,
        innovation_sqrt: x,
        guarded: guarded || fired,
    })
}

/// Triangularise the prediction pre-array
/// `[[ΦL, Q½],[L, 0]]` → lower `[[X,0],[Y,Z]]`
/// giving `X = (ΦΣΦᵀ+Q)½`, `Y = G·X` and `Z = P½`.
pub(crate) fn backward_array(
    phi_l: &DMatrix<f64>,
    noise_sqrt: &DMatrix<f64>,
    l_prev: &DMatrix<f64>,
    work: &mut DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = phi_l.nrows();
    debug_assert_eq!(work.nrows(), 2 * d);
    work.fill(0.0);
    work.view_mut((0, 0), (d, d)).tr_copy_from(phi_l);
    work.view_mut((0, d), (d, d)).tr_copy_from(l_prev);
    work.view_mut((d, 0), (d, d)).tr_copy_from(noise_sqrt);
    linalg::qr_r_in_place(work);
    normalize_pivot_signs(work);
    let mut x = DMatrix::zeros(d, d);
    let mut y = DMatrix::zeros(d, d);
    let mut z = DMatrix::zeros(d, d);
    read_lower_block(work, 0, 0, &mut x);
    read_block_transposed(work, 0, d, &mut y);
    read_lower_block(work, d, d, &mut z);
    (x, y, z)
}

/// Triangularise the measurement pre-array
/// `[[R½, CᵀL],[0, L]]` → lower `[[X,0],[Y,Z]]`
/// giving `X = S½`, `Y = K·X` and `Z` the posterior factor.
fn measurement_array(
    r_sqrt: Option<&DMatrix<f64>>,
    ct_l: &DMatrix<f64>,
    l_pred: &DMatrix<f64>,
    work: &mut DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = ct_l.nrows();
    let dd = l_pred.nrows();
    debug_assert_eq!(work.nrows(), d + dd);
    work.fill(0.0);
    if let Some(r) = r_sqrt {
        work.view_mut((0, 0), (d, d)).tr_copy_from(r);
    }
    work.view_mut((d, 0), (dd, d)).tr_copy_from(ct_l);
    work.view_mut((d, d), (dd, dd)).tr_copy_from(l_pred);
    linalg::qr_r_in_place(work);
    normalize_pivot_signs(work);
    let mut x = DMatrix::zeros(d, d);
    let mut y = DMatrix::zeros(dd, d);
    let mut z = DMatrix::zeros(dd, dd);
    read_lower_block(work, 0, 0, &mut x);
    read_block_transposed(work, 0, d, &mut y);
    read_lower_block(work, d, d, &mut z);
    (x, y, z)
}

/// Flip rows of the triangularised workspace so pivots are non-negative.
fn normalize_pivot_signs(r: &mut DMatrix<f64>) {
    let n = r.nrows().min(r.ncols());
    for row in 0..n {
        if r[(row, row)] < 0.0 {
            for c in row..r.ncols() {
                r[(row, c)] = -r[(row, c)];
            }
        }
    }
}

/// Read the transposed diagonal block at (r0, c0) as a lower factor.
fn read_lower_block(work: &DMatrix<f64>, r0: usize, c0: usize, out: &mut DMatrix<f64>) {
    let n = out.nrows();
    for c in 0..n {
        for r in 0..n {
            out[(r, c)] = if r >= c { work[(r0 + c, c0 + r)] } else { 0.0 };
        }
    }
}

/// Read the transposed off-diagonal block at (r0, c0).
fn read_block_transposed(work: &DMatrix<f64>, r0: usize, c0: usize, out: &mut DMatrix<f64>) {
    for c in 0..out.ncols() {
        for r in 0..out.nrows() {
            out[(r, c)] = work[(r0 + c, c0 + r)];
        }
    }
}

/// Run the probabilistic solve at unit diffusion over `grid` (strictly
/// increasing, starting after `t0`), linearising at the predictive mean.
///
/// The returned chain has `grid.len() + 1` nodes: the exact initial state is
/// included as node 0 with a degenerate kernel.
pub fn solve_ivp(
    field: &dyn VectorField,
    theta: &[f64],
    prior: &IwpPrior,
    init: &InitialState,
    t0: f64,
    grid: &[f64],
    mode: LinMode,
) -> Result<(BackwardMarkovChain, SolveDiagnostics)> {
    let d = prior.dim();
    let dd = prior.state_dim();
    if field.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "field dimension {} does not match prior dimension {d}",
            field.dim()
        )));
    }
    if init.state.len() != dd {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, expected {dd}",
            init.state.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty solver grid".into()));
    }
    let mut t_prev = t0;
    for &t in grid {
        if !(t > t_prev) {
            return Err(Error::InvalidArgument(format!(
                "solver grid must be strictly increasing past t0 (got {t} after {t_prev})"
            )));
        }
        t_prev = t;
    }
    if !init.state.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("initial state".into()));
    }

    let n_steps = grid.len();
    let phi_scaled = prior.phi_scaled();
    let noise_sqrt_scaled = prior.noise_sqrt_scaled();

    let mut mean = init.state.clone();
    let mut fact = DMatrix::<f64>::zeros(dd, dd);

    let mut gains = Vec::with_capacity(n_steps);
    let mut offsets = Vec::with_capacity(n_steps);
    let mut noise_sqrts = Vec::with_capacity(n_steps);
    let mut residual_norms = Vec::with_capacity(n_steps);
    let mut min_innovation = f64::INFINITY;
    let mut guarded_updates = 0usize;

    // Scratch reused across steps.
    let mut work2 = DMatrix::zeros(2 * dd, 2 * dd);
    let mut work_upd = DMatrix::zeros(d + dd, d + dd);
    let mut mean_scaled = DVector::zeros(dd);
    let mut mean_pred = DVector::zeros(dd);
    let mut fact_scaled = DMatrix::zeros(dd, dd);
    let mut phi_l = DMatrix::zeros(dd, dd);
    let mut ct_l = DMatrix::zeros(d, dd);
    let mut y_lin = vec![0.0; d];

    let mut t_prev = t0;
    for (step, &t) in grid.iter().enumerate() {
        let h = t - t_prev;
        let tau = prior.preconditioner(h);

        // Into rescaled coordinates.
        for i in 0..dd {
            mean_scaled[i] = mean[i] / tau[i];
        }
        for r in 0..dd {
            let inv = 1.0 / tau[r];
            for c in 0..dd {
                fact_scaled[(r, c)] = fact[(r, c)] * inv;
            }
        }

        phi_l.gemm(1.0, phi_scaled, &fact_scaled, 0.0);
        mean_pred.gemv(1.0, phi_scaled, &mean_scaled, 0.0);

        let (x, y, z) = backward_array(&phi_l, noise_sqrt_scaled, &fact_scaled, &mut work2);
        let mut gain = y;
        linalg::solve_right_lower_guarded(&mut gain, &x, GAIN_GUARD_REL);

        // Back to natural coordinates.
        let mut gain_raw = gain;
        for r in 0..dd {
            for c in 0..dd {
                gain_raw[(r, c)] *= tau[r] / tau[c];
            }
        }
        let mut noise_raw = z;
        let mut l_pred = x;
        for r in 0..dd {
            let s = tau[r];
            for c in 0..dd {
                noise_raw[(r, c)] *= s;
                l_pred[(r, c)] *= s;
            }
        }
        let mut mu_pred = DVector::zeros(dd);
        for i in 0..dd {
            mu_pred[i] = mean_pred[i] * tau[i];
        }

        // ζ_n = μ_n − G_n μ⁻_{n+1}, with μ_n the filtered mean before this step.
        let mut offset = mean.clone();
        offset.gemv(-1.0, &gain_raw, &mu_pred, 1.0);
        gains.push(gain_raw);
        offsets.push(offset);
        noise_sqrts.push(noise_raw);

        // Linearise at the predictive mean and condition on the residual.
        for j in 0..d {
            y_lin[j] = mu_pred[j];
        }
        let obs = linearize(field, theta, t, &y_lin, mode, prior)
            .map_err(|_| Error::Diverged { step: step + 1, t })?;
        ct_l.gemm(1.0, &obs.ct, &l_pred, 0.0);
        let mut residual = obs.offset.clone();
        residual.gemv(-1.0, &obs.ct, &mu_pred, 1.0);
        let outcome = dirac_update(&mu_pred, &l_pred, &ct_l, &residual, &mut work_upd)
            .map_err(|_| Error::Diverged { step: step + 1, t })?;

        if !outcome.mean.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { step: step + 1, t });
        }
        residual_norms.push(residual.norm());
        for i in 0..d {
            min_innovation = min_innovation.min(outcome.innovation_sqrt[(i, i)]);
        }
        if outcome.guarded {
            guarded_updates += 1;
        }
        mean = outcome.mean;
        fact = outcome.cov_sqrt;
        t_prev = t;
    }

    let mut times = Vec::with_capacity(n_steps + 1);
    times.push(t0);
    times.extend_from_slice(grid);

    let chain = BackwardMarkovChain {
        times,
        terminal_mean: mean,
        terminal_cov_sqrt: fact,
        gains,
        offsets,
        noise_sqrts,
        kappa_applied: 1.0,
        state_dim: dd,
        ode_dim: d,
    };
    let diagnostics = SolveDiagnostics {
        residual_norms,
        min_innovation_scale: min_innovation,
        steps: n_steps,
        guarded_updates,
    };
    Ok((chain, diagnostics))
}

/// Marginals of the chain at every node, by noiseless backward rollout
/// `ξ_n = G_n ξ_{n+1} + ζ_n`, `Λ_n = G_n Λ_{n+1} G_nᵀ + P_n`.
pub fn smooth(chain: &BackwardMarkovChain) -> Vec<GaussianBelief> {
    let n = chain.len();
    let dd = chain.state_dim;
    let mut out = vec![
        GaussianBelief {
            mean: chain.terminal_mean.clone(),
            cov_sqrt: chain.terminal_cov_sqrt.clone(),
        };
        n
    ];
    let mut work = DMatrix::zeros(2 * dd, dd);
    for s in (0..chain.step_count()).rev() {
        let next = &out[s + 1];
        let g = &chain.gains[s];
        let mut mean = chain.offsets[s].clone();
        mean.gemv(1.0, g, &next.mean, 1.0);
        let gl = g * &next.cov_sqrt;
        work.fill(0.0);
        work.view_mut((0, 0), (dd, dd)).tr_copy_from(&gl);
        work.view_mut((dd, 0), (dd, dd)).tr_copy_from(&chain.noise_sqrts[s]);
        linalg::qr_r_in_place(&mut work);
        normalize_pivot_signs(&mut work);
        let mut l = DMatrix::zeros(dd, dd);
        read_lower_block(&work, 0, 0, &mut l);
        out[s] = GaussianBelief { mean, cov_sqrt: l };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearize::LinMode;
    use crate::models;
    use crate::prior::taylor_init;
    use approx::assert_relative_eq;

    fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect()
    }

    #[test]
    fn predict_with_zero_covariance_is_deterministic_propagation() {
        let prior = IwpPrior::new(1, 1).unwrap();
        let tr = prior.transition(1.0).unwrap();
        let belief = GaussianBelief::deterministic(DVector::from_column_slice(&[1.0, 2.0]));
        let (pred, gain, noise) = predict(&belief, &tr, 0.0).unwrap();
        assert_relative_eq!(pred.mean, &tr.phi * &belief.mean);
        assert_eq!(pred.cov(), DMatrix::zeros(2, 2));
        assert_eq!(gain, DMatrix::zeros(2, 2));
        assert_eq!(noise, DMatrix::zeros(2, 2));
    }

    #[test]
    fn predict_from_zero_covariance_gives_process_noise() {
        let prior = IwpPrior::new(1, 1).unwrap();
        let tr = prior.transition(1.0).unwrap();
        let belief = GaussianBelief::deterministic(DVector::zeros(2));
        let (pred, _, _) = predict(&belief, &tr, 1.0).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 0.5, 0.5, 1.0]);
        assert_relative_eq!(pred.cov(), expect, epsilon = 1e-14);
    }

    #[test]
    fn predict_identity_step_has_identity_gain() {
        let prior = IwpPrior::new(1, 1).unwrap();
        let tr = prior.transition(0.0).unwrap();
        let belief = GaussianBelief {
            mean: DVector::from_column_slice(&[1.0, -1.0]),
            cov_sqrt: DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.5, 1.0]),
        };
        let (_, gain, noise) = predict(&belief, &tr, 1.0).unwrap();
        assert_relative_eq!(gain, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_relative_eq!(noise.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn update_hand_kalman_algebra() {
        // Σ⁻ with factor from its Cholesky; C = [0,1]ᵀ, b = 0, μ⁻ = [0, 0.4].
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 0.5, 0.5, 1.0]);
        let l = crate::linalg::cholesky_lower(&sigma).unwrap();
        let predicted = GaussianBelief {
            mean: DVector::from_column_slice(&[0.0, 0.4]),
            cov_sqrt: l,
        };
        let obs = AffineObservation {
            linear: DMatrix::zeros(1, 1),
            offset: DVector::zeros(1),
            ct: DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        };
        let (filtered, e) = update(&predicted, &obs).unwrap();
        assert_relative_eq!(e[0], -0.4, epsilon = 1e-14);
        assert_relative_eq!(filtered.mean[0], -0.2, epsilon = 1e-12);
        assert_relative_eq!(filtered.mean[1], 0.0, epsilon = 1e-12);
        let cov = filtered.cov();
        assert_relative_eq!(cov[(0, 0)], 1.0 / 12.0, epsilon = 1e-12);
        assert_relative_eq!(cov[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn update_with_zero_covariance_and_consistent_residual_is_identity() {
        let field = models::ScalarLinear { lambda_index: 0 };
        let prior = IwpPrior::new(1, 1).unwrap();
        let init = taylor_init(&field, &[2.0], &[1.0], 1).unwrap();
        let predicted = GaussianBelief::deterministic(init.state.clone());
        let obs = linearize(&field, &[2.0], 0.0, &[1.0], LinMode::Ek1, &prior).unwrap();
        let (filtered, e) = update(&predicted, &obs).unwrap();
        assert_relative_eq!(e.norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(filtered.mean, init.state, epsilon = 1e-14);
    }

    #[test]
    fn post_update_residual_vanishes() {
        // Dirac conditioning: Cᵀμ = b after the update whenever S is regular.
        let problem = models::lotka_volterra();
        let prior = IwpPrior::new(2, 2).unwrap();
        let init = taylor_init(
            problem.field.as_ref(),
            &problem.ode_params_true,
            &[5.0, 3.0],
            2,
        )
        .unwrap();
        let tr = prior.transition(0.1).unwrap();
        let belief = GaussianBelief::deterministic(init.state.clone());
        let (pred, _, _) = predict(&belief, &tr, 1.0).unwrap();
        let obs = linearize(
            problem.field.as_ref(),
            &problem.ode_params_true,
            0.1,
            &[pred.mean[0], pred.mean[1]],
            LinMode::Ek1,
            &prior,
        )
        .unwrap();
        let (filtered, _) = update(&pred, &obs).unwrap();
        let post = &obs.ct * &filtered.mean - &obs.offset;
        assert!(post.norm() <= 1e-10, "post-update residual {}", post.norm());
    }

    #[test]
    fn solve_exponential_decay_tracks_truth() {
        // ẏ = −y, y(0) = 1: the block-0 smoothed mean matches e^{−t}.
        let field = models::ScalarLinear { lambda_index: 0 };
        let prior = IwpPrior::new(3, 1).unwrap();
        let init = taylor_init(&field, &[-1.0], &[1.0], 3).unwrap();
        let grid = uniform_grid(0.0, 1.0, 100);
        let (chain, diag) = solve_ivp(&field, &[-1.0], &prior, &init, 0.0, &grid, LinMode::Ek1).unwrap();
        assert_eq!(diag.steps, 100);
        let marginals = smooth(&chain);
        let mut max_err = 0.0_f64;
        for (node, belief) in marginals.iter().enumerate() {
            let t = chain.times[node];
            max_err = max_err.max((belief.mean[0] - (-t).exp()).abs());
        }
        assert!(max_err <= 1e-6, "max error {max_err}");
    }

    #[test]
    fn affine_fields_have_tiny_post_update_residuals() {
        let problem = models::linear_test();
        let prior = IwpPrior::new(2, 2).unwrap();
        let init = taylor_init(problem.field.as_ref(), &[0.5, 2.0], &[1.0, 0.0], 2).unwrap();
        let grid = uniform_grid(0.0, 2.0, 50);
        let (chain, _) =
            solve_ivp(problem.field.as_ref(), &[0.5, 2.0], &prior, &init, 0.0, &grid, LinMode::Ek1)
                .unwrap();
        // Verify exact conditioning on every node of the smoothed solution.
        let marginals = smooth(&chain);
        let (lin, offset) = problem.field.affine_parts(0.0, &[0.5, 2.0]).unwrap();
        for belief in marginals.iter() {
            let y0 = DVector::from_column_slice(&belief.mean.as_slice()[0..2]);
            let y1 = DVector::from_column_slice(&belief.mean.as_slice()[2..4]);
            let res = &y1 - (&lin * &y0 + &offset);
            assert!(res.amax() <= 1e-10, "residual {}", res.amax());
        }
    }

    #[test]
    fn smoother_base_case_single_node() {
        let field = models::ScalarLinear { lambda_index: 0 };
        let prior = IwpPrior::new(1, 1).unwrap();
        let init = taylor_init(&field, &[1.0], &[1.0], 1).unwrap();
        let (chain, _) = solve_ivp(&field, &[1.0], &prior, &init, 0.0, &[0.5], LinMode::Ek1).unwrap();
        let marginals = smooth(&chain);
        assert_relative_eq!(marginals[1].mean, chain.terminal_mean);
        assert_relative_eq!(marginals[1].cov_sqrt, chain.terminal_cov_sqrt);
        // Node 0 is the exact initial state.
        assert_relative_eq!(marginals[0].mean, init.state);
        assert_eq!(marginals[0].cov(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn divergent_parameters_surface_as_typed_error() {
        // FitzHugh--Nagumo with c ≈ 0 blows up the 1/c term.
        let problem = models::fitzhugh_nagumo();
        let prior = IwpPrior::new(2, 2).unwrap();
        let theta = [0.2, 0.2, 1e-308];
        let init = taylor_init(problem.field.as_ref(), &theta, &[-1.0, 1.0], 2).unwrap_or(
            crate::prior::InitialState {
                state: DVector::zeros(6),
                degraded: true,
            },
        );
        let grid = uniform_grid(0.0, 1.0, 20);
        let res = solve_ivp(problem.field.as_ref(), &theta, &prior, &init, 0.0, &grid, LinMode::Ek1);
        match res {
            Err(Error::Diverged { .. }) | Err(Error::NonFinite(_)) => {}
            other => panic!("expected divergence error, got {other:?}"),
        }
    }
}
