//! The ν-times integrated Wiener process prior.
//!
//! The state `x ∈ R^{d(ν+1)}` stacks the modelled solution and its first ν
//! derivatives in derivative-major order: `x[m·d + j] = y_j^(m)`. The top
//! derivative is driven by white noise with unit diffusion; the overall
//! diffusion scale κ is applied analytically downstream.
//!
//! Transitions have closed forms (the drift is nilpotent), and every step
//! admits the diagonal rescaling `T(h)` under which both the transition
//! matrix and the process noise become step-size independent. The filters
//! work in those rescaled coordinates, which is what keeps orders up to
//! ν = 5 numerically healthy at small steps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linalg;
use crate::linearize::VectorField;

/// Gauss--Markov prior: the (ν, d)-times integrated Wiener process.
#[derive(Clone, Debug)]
pub struct IwpPrior {
    nu: usize,
    dim: usize,
    /// Step-size-free transition in preconditioned coordinates, full D×D.
    phi_scaled: DMatrix<f64>,
    /// Lower Cholesky factor of the step-size-free process noise, full D×D.
    noise_sqrt_scaled: DMatrix<f64>,
}

impl IwpPrior {
    pub fn new(nu: usize, dim: usize) -> Result<Self> {
        if nu < 1 || dim < 1 {
            return Err(Error::InvalidArgument(
                "integrated Wiener prior needs nu >= 1 and d >= 1".into(),
            ));
        }
        let n = nu + 1;
        let mut phibar = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in i..n {
                phibar[(i, k)] = binomial(nu - i, k - i);
            }
        }
        let mut qbar = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                qbar[(i, j)] = 1.0 / (2 * nu + 1 - i - j) as f64;
            }
        }
        let qbar_chol = linalg::cholesky_lower(&qbar).ok_or_else(|| {
            Error::InvalidArgument(format!("prior order nu = {nu} is numerically unsupported"))
        })?;
        Ok(IwpPrior {
            nu,
            dim,
            phi_scaled: kron_with_identity(&phibar, dim),
            noise_sqrt_scaled: kron_with_identity(&qbar_chol, dim),
        })
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    /// ODE dimension d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// State dimension D = d(ν+1).
    pub fn state_dim(&self) -> usize {
        self.dim * (self.nu + 1)
    }

    /// Selection matrix (d×D) extracting derivative block `m`.
    pub fn projection(&self, m: usize) -> Result<DMatrix<f64>> {
        if m > self.nu {
            return Err(Error::InvalidArgument(format!(
                "derivative index {m} exceeds prior order {}",
                self.nu
            )));
        }
        let mut p = DMatrix::zeros(self.dim, self.state_dim());
        for j in 0..self.dim {
            p[(j, m * self.dim + j)] = 1.0;
        }
        Ok(p)
    }

    /// Closed-form transition model over a step of length `h ≥ 0`, at unit
    /// diffusion.
    pub fn transition(&self, h: f64) -> Result<Transition> {
        if !(h >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative step length {h}")));
        }
        let nu = self.nu;
        let n = nu + 1;
        let mut phi_s = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in i..n {
                phi_s[(i, k)] = h.powi((k - i) as i32) / factorial(k - i);
            }
        }
        let mut q_s = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let p = 2 * nu + 1 - i - j;
                q_s[(i, j)] = h.powi(p as i32) / (p as f64 * factorial(nu - i) * factorial(nu - j));
            }
        }
        let tau = self.preconditioner(h);
        let mut noise_sqrt = self.noise_sqrt_scaled.clone();
        for r in 0..noise_sqrt.nrows() {
            let s = tau[r];
            for c in 0..noise_sqrt.ncols() {
                noise_sqrt[(r, c)] *= s;
            }
        }
        Ok(Transition {
            phi: kron_with_identity(&phi_s, self.dim),
            noise: kron_with_identity(&q_s, self.dim),
            noise_sqrt,
            h,
        })
    }

    /// Diagonal of the step preconditioner `T(h)`:
    /// `τ_i = √h · h^(ν−i) / (ν−i)!` on derivative block i.
    pub fn preconditioner(&self, h: f64) -> DVector<f64> {
        let mut t = DVector::zeros(self.state_dim());
        let sqrt_h = h.sqrt();
        for i in 0..=self.nu {
            let v = sqrt_h * h.powi((self.nu - i) as i32) / factorial(self.nu - i);
            for j in 0..self.dim {
                t[i * self.dim + j] = v;
            }
        }
        t
    }

    /// Step-size-free transition matrix (preconditioned coordinates).
    pub(crate) fn phi_scaled(&self) -> &DMatrix<f64> {
        &self.phi_scaled
    }

    /// Step-size-free process noise factor (preconditioned coordinates).
    pub(crate) fn noise_sqrt_scaled(&self) -> &DMatrix<f64> {
        &self.noise_sqrt_scaled
    }
}

/// Discrete transition of the prior over one step: `x⁺ ~ N(Φx, κQ)`.
#[derive(Clone, Debug)]
pub struct Transition {
    pub phi: DMatrix<f64>,
    pub noise: DMatrix<f64>,
    /// Lower factor with `noise = noise_sqrt · noise_sqrtᵀ`.
    pub noise_sqrt: DMatrix<f64>,
    pub h: f64,
}

/// Exact stacked derivatives of the solution at the initial time.
#[derive(Clone, Debug)]
pub struct InitialState {
    /// `[y₀, ẏ₀, …, y₀^(ν)]`, derivative-major.
    pub state: DVector<f64>,
    /// True when derivative blocks of order ≥ 2 could not be computed and
    /// were zero-filled (field without jet support).
    pub degraded: bool,
}

/// Exact initial state by Taylor-mode differentiation of the field.
///
/// Coefficients `c_{m+1} = f_m / (m+1)` are accumulated from jet evaluations
/// of `f` on the partially known series; block m of the result is `m!·c_m`.
/// Fields without jet support yield the exact first two blocks and zeros
/// above, with the `degraded` flag set.
pub fn taylor_init(
    field: &dyn VectorField,
    theta: &[f64],
    y0: &[f64],
    nu: usize,
) -> Result<InitialState> {
    let d = field.dim();
    if y0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "initial value has length {}, field dimension is {d}",
            y0.len()
        )));
    }
    let mut state = DVector::zeros(d * (nu + 1));
    for j in 0..d {
        state[j] = y0[j];
    }

    // Taylor coefficients c[m][j] = y_j^(m)(0) / m!.
    let mut coeffs: Vec<Vec<f64>> = vec![y0.to_vec()];
    let mut degraded = false;
    for m in 0..nu {
        let order = m + 1;
        let t_jet = Jet::variable(0.0, order);
        let y_jets: Vec<Jet> = (0..d)
            .map(|j| Jet::from_coeffs((0..order).map(|k| coeffs[k][j]).collect()))
            .collect();
        let f_jets = match field.eval_jet(&t_jet, &y_jets, theta) {
            Some(f) => f,
            None => {
                if m == 0 {
                    // First derivative needs only a plain evaluation.
                    let mut f = vec![0.0; d];
                    field.eval(0.0, y0, theta, &mut f);
                    coeffs.push(f);
                    continue;
                }
                degraded = true;
                break;
            }
        };
        let next: Vec<f64> = (0..d).map(|j| f_jets[j].coeff(m) / order as f64).collect();
        coeffs.push(next);
    }

    for (m, c) in coeffs.iter().enumerate().skip(1) {
        let scale = factorial(m);
        for j in 0..d {
            let v = scale * c[j];
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("derivative block {m} of the initial state")));
            }
            state[m * d + j] = v;
        }
    }
    Ok(InitialState { state, degraded })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Expand a scalar (ν+1)×(ν+1) block matrix to the full D×D state matrix
/// (Kronecker product with I_d in derivative-major ordering).
fn kron_with_identity(m: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for k in 0..n {
            let v = m[(i, k)];
            if v != 0.0 {
                for j in 0..d {
                    out[(i * d + j, k * d + j)] = v;
                }
            }
        }
    }
    out
}
