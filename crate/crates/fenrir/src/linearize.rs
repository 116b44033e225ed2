//! Vector fields and the ODE information operator.
//!
//! The solver conditions a Gauss--Markov prior on the residual
//! `z(t) = E₁ᵀx(t) − f_θ(t, E₀ᵀx(t))` being zero on a grid. For non-linear
//! fields the residual is replaced by an affine surrogate, either of zeroth
//! order (no Jacobian) or first order (extended-Kalman style).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::prior::IwpPrior;

/// Right-hand side of an ODE system `ẏ = f_θ(t, y)`, with enough structure
/// for first-order linearisation and Taylor-mode initialisation.
pub trait VectorField: Send + Sync {
    /// State dimension `d`.
    fn dim(&self) -> usize;

    /// Number of ODE parameters consumed from `theta`.
    fn param_dim(&self) -> usize;

    /// Evaluate `f_θ(t, y)` into `out` (length `d`).
    fn eval(&self, t: f64, y: &[f64], theta: &[f64], out: &mut [f64]);

    /// Whether [`VectorField::jacobian`] is implemented.
    fn has_jacobian(&self) -> bool {
        false
    }

    /// State Jacobian `∂f/∂y` (d×d) into `out`. Only called when
    /// `has_jacobian()` is true.
    fn jacobian(&self, t: f64, y: &[f64], theta: &[f64], out: &mut DMatrix<f64>) {
        let _ = (t, y, theta, out);
        unimplemented!("vector field without Jacobian");
    }

    /// Evaluate over truncated Taylor series, for exact initialisation.
    /// Fields without jet support return `None`; initialisation then falls
    /// back to the degraded two-block form.
    fn eval_jet(&self, t: &Jet, y: &[Jet], theta: &[f64]) -> Option<Vec<Jet>> {
        let _ = (t, y, theta);
        None
    }

    /// Exact affine decomposition `f_θ(t, y) = L·y + b`, when it exists.
    fn affine_parts(&self, t: f64, theta: &[f64]) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let _ = (t, theta);
        None
    }

    fn is_affine(&self) -> bool {
        false
    }
}

/// Linearisation order for the information operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LinMode {
    /// Zeroth order: `L = 0`, `b = f(t, ỹ)`.
    Ek0,
    /// First order: `L = J_f(t, ỹ)`, `b = f(t, ỹ) − J·ỹ`.
    Ek1,
}

impl std::fmt::Display for LinMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LinMode::Ek0 => write!(f, "ek0"),
            LinMode::Ek1 => write!(f, "ek1"),
        }
    }
}

impl std::str::FromStr for LinMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ek0" => Ok(LinMode::Ek0),
            "ek1" => Ok(LinMode::Ek1),
            other => Err(Error::Config(format!("unknown linearisation mode `{other}`"))),
        }
    }
}

/// Affine surrogate of the information operator at one grid node.
///
/// The solver conditions on `Cᵀx = b` with `Cᵀ = E₁ᵀ − L·E₀ᵀ`; `ct` stores
/// `Cᵀ` (d×D) directly since that is the orientation every formula consumes.
#[derive(Clone, Debug)]
pub struct AffineObservation {
    pub linear: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub ct: DMatrix<f64>,
}

impl AffineObservation {
    /// Assemble from affine parts `(L, b)` of the field at one node.
    pub fn from_parts(linear: DMatrix<f64>, offset: DVector<f64>, prior: &IwpPrior) -> Self {
        let d = prior.dim();
        let dd = prior.state_dim();
        let mut ct = DMatrix::zeros(d, dd);
        for r in 0..d {
            for c in 0..d {
                ct[(r, c)] = -linear[(r, c)];
            }
            ct[(r, d + r)] = 1.0;
        }
        AffineObservation { linear, offset, ct }
    }

    /// `C` in its D×d orientation.
    pub fn c(&self) -> DMatrix<f64> {
        self.ct.transpose()
    }
}

/// Residual of the ODE information operator: `E₁ᵀx − f_θ(t, E₀ᵀx)`.
pub fn information_residual(
    field: &dyn VectorField,
    theta: &[f64],
    t: f64,
    x: &DVector<f64>,
    prior: &IwpPrior,
) -> Result<DVector<f64>> {
    let d = prior.dim();
    if x.len() != prior.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has length {}, expected {}",
            x.len(),
            prior.state_dim()
        )));
    }
    let y0 = x.as_slice()[0..d].to_vec();
    let mut f = vec![0.0; d];
    field.eval(t, &y0, theta, &mut f);
    let mut r = DVector::zeros(d);
    for i in 0..d {
        r[i] = x[d + i] - f[i];
    }
    Ok(r)
}

/// Affine surrogate of the field at linearisation point `y_tilde`.
pub fn linearize(
    field: &dyn VectorField,
    theta: &[f64],
    t: f64,
    y_tilde: &[f64],
    mode: LinMode,
    prior: &IwpPrior,
) -> Result<AffineObservation> {
    let d = field.dim();
    let mut f = vec![0.0; d];
    field.eval(t, y_tilde, theta, &mut f);
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("vector field output".into()));
    }
    let (linear, offset) = match mode {
        LinMode::Ek0 => (DMatrix::zeros(d, d), DVector::from_column_slice(&f)),
        LinMode::Ek1 => {
            if !field.has_jacobian() {
                return Err(Error::InvalidArgument(
                    "first-order linearisation requires a Jacobian".into(),
                ));
            }
            let mut jac = DMatrix::zeros(d, d);
            field.jacobian(t, y_tilde, theta, &mut jac);
            if jac.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("vector field Jacobian".into()));
            }
            let mut b = DVector::from_column_slice(&f);
            for r in 0..d {
                for c in 0..d {
                    b[r] -= jac[(r, c)] * y_tilde[c];
                }
            }
            (jac, b)
        }
    };
    Ok(AffineObservation::from_parts(linear, offset, prior))
}

/// Central finite-difference Jacobian, used in tests to cross-check the
/// hand-coded Jacobians of the bundled models.
pub fn fd_jacobian(field: &dyn VectorField, t: f64, y: &[f64], theta: &[f64]) -> DMatrix<f64> {
    let d = field.dim();
    let mut out = DMatrix::zeros(d, d);
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    let mut yp = y.to_vec();
    for c in 0..d {
        let h = 1e-6 * (1.0 + y[c].abs());
        yp[c] = y[c] + h;
        field.eval(t, &yp, theta, &mut fp);
        yp[c] = y[c] - h;
        field.eval(t, &yp, theta, &mut fm);
        yp[c] = y[c];
        for r in 0..d {
            out[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use approx::assert_relative_eq;

    #[test]
    fn residual_on_consistent_state_is_zero() {
        // f(t,y) = λy with x = [3, 6] satisfies E₁ᵀx = f(E₀ᵀx) for λ = 2.
        let field = models::ScalarLinear { lambda_index: 0 };
        let prior = IwpPrior::new(1, 1).unwrap();
        let x = DVector::from_column_slice(&[3.0, 6.0]);
        let r = information_residual(&field, &[2.0], 0.0, &x, &prior).unwrap();
        assert_relative_eq!(r[0], 0.0);
    }

    #[test]
    fn residual_direct_substitution() {
        let field = models::ScalarLinear { lambda_index: 0 };
        let prior = IwpPrior::new(1, 1).unwrap();
        let x = DVector::from_column_slice(&[3.0, 7.0]);
        let r = information_residual(&field, &[2.0], 0.0, &x, &prior).unwrap();
        assert_relative_eq!(r[0], 1.0);
    }

    #[test]
    fn ek0_has_zero_linear_part() {
        let problem = models::lotka_volterra();
        let prior = IwpPrior::new(2, 2).unwrap();
        let obs = linearize(
            problem.field.as_ref(),
            &problem.ode_params_true,
            0.0,
            &[5.0, 3.0],
            LinMode::Ek0,
            &prior,
        )
        .unwrap();
        assert_eq!(obs.linear, DMatrix::zeros(2, 2));
        // b = f(ỹ) for EK0.
        assert_relative_eq!(obs.offset[0], -5.0);
        assert_relative_eq!(obs.offset[1], 3.0);
    }

    #[test]
    fn ek1_on_affine_field_is_exact_and_point_independent() {
        let field = models::ScalarLinear { lambda_index: 0 };
        let prior = IwpPrior::new(1, 1).unwrap();
        for y in [0.3, -2.0, 17.0] {
            let obs = linearize(&field, &[2.0], 0.0, &[y], LinMode::Ek1, &prior).unwrap();
            assert_relative_eq!(obs.linear[(0, 0)], 2.0);
            assert_relative_eq!(obs.offset[0], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn ek1_lotka_volterra_jacobian_by_hand() {
        let problem = models::lotka_volterra();
        let prior = IwpPrior::new(1, 2).unwrap();
        let obs = linearize(
            problem.field.as_ref(),
            &problem.ode_params_true,
            0.0,
            &[5.0, 3.0],
            LinMode::Ek1,
            &prior,
        )
        .unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[-1.0, -5.0, 3.0, 1.0]);
        assert_relative_eq!(obs.linear, expect, epsilon = 1e-12);
    }

    #[test]
    fn both_modes_reproduce_field_at_linearisation_point() {
        let problem = models::fitzhugh_nagumo();
        let prior = IwpPrior::new(1, 2).unwrap();
        let y = [-0.7, 0.4];
        let mut f = vec![0.0; 2];
        problem.field.eval(0.0, &y, &problem.ode_params_true, &mut f);
        for mode in [LinMode::Ek0, LinMode::Ek1] {
            let obs = linearize(problem.field.as_ref(), &problem.ode_params_true, 0.0, &y, mode, &prior)
                .unwrap();
            for r in 0..2 {
                let lin = obs.linear[(r, 0)] * y[0] + obs.linear[(r, 1)] * y[1] + obs.offset[r];
                assert_relative_eq!(lin, f[r], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ct_matches_block_identity_on_random_vectors() {
        let problem = models::lotka_volterra();
        let prior = IwpPrior::new(3, 2).unwrap();
        let obs = linearize(
            problem.field.as_ref(),
            &problem.ode_params_true,
            0.0,
            &[1.0, 2.0],
            LinMode::Ek1,
            &prior,
        )
        .unwrap();
        let e0 = prior.projection(0).unwrap();
        let e1 = prior.projection(1).unwrap();
        let x = DVector::from_fn(prior.state_dim(), |i, _| (i as f64 * 0.37).sin());
        let lhs = &obs.ct * &x;
        let rhs = &e1 * &x - &obs.linear * (&e0 * &x);
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
    }
}
