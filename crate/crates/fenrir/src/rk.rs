//! Classical adaptive Runge--Kutta integration.
//!
//! One explicit Dormand--Prince 5(4) pair with PI-free standard step
//! control and cubic Hermite dense output. Used for ground-truth data
//! generation, the least-squares baseline, and trajectory evaluation.
//! Stiff parameterisations surface as a step-size underflow error that the
//! estimation layer maps to a large loss.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linearize::VectorField;
use crate::models::BenchmarkProblem;
use crate::regression::ObservationSet;

/// Tolerances for baseline fits.
pub const FIT_ABS_TOL: f64 = 1e-8;
pub const FIT_REL_TOL: f64 = 1e-6;
/// Tolerances for ground-truth generation, tighter so that truth error is
/// negligible against fit error.
pub const TRUTH_ABS_TOL: f64 = 1e-9;
pub const TRUTH_REL_TOL: f64 = 1e-7;

const MAX_STEPS: usize = 500_000;

// Dormand--Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// `b − b̂` of the embedded fourth-order solution.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Debug)]
struct StepRecord {
    t0: f64,
    h: f64,
    y0: DVector<f64>,
    y1: DVector<f64>,
    f0: DVector<f64>,
    f1: DVector<f64>,
}

/// Continuous solution over the integration span.
#[derive(Clone, Debug)]
pub struct RkSolution {
    steps: Vec<StepRecord>,
    t_start: f64,
    t_end: f64,
    pub accepted_steps: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl RkSolution {
    pub fn t_span(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    /// Evaluate the dense output at `t` (cubic Hermite per accepted step).
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let tol = 1e-9 * (1.0 + t.abs());
        assert!(
            t >= self.t_start - tol && t <= self.t_end + tol,
            "t = {t} outside integration span [{}, {}]",
            self.t_start,
            self.t_end
        );
        let idx = match self
            .steps
            .binary_search_by(|s| s.t0.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => (i - 1).min(self.steps.len() - 1),
        };
        let s = &self.steps[idx];
        let theta = ((t - s.t0) / s.h).clamp(0.0, 1.0);
        hermite(s, theta)
    }
}

fn hermite(s: &StepRecord, theta: f64) -> DVector<f64> {
    // y(θ) = (1−θ)y0 + θy1 + θ(θ−1)[(1−2θ)(y1−y0) + (θ−1)h f0 + θ h f1]
    let one_m = 1.0 - theta;
    let tt = theta * (theta - 1.0);
    let mut out = &s.y0 * one_m + &s.y1 * theta;
    let diff = &s.y1 - &s.y0;
    out += (&diff * (1.0 - 2.0 * theta) + &s.f0 * ((theta - 1.0) * s.h) + &s.f1 * (theta * s.h)) * tt;
    out
}

struct Stepper<'a> {
    field: &'a dyn VectorField,
    theta: &'a [f64],
    k: Vec<Vec<f64>>,
    y_stage: Vec<f64>,
    abs_tol: f64,
    rel_tol: f64,
}

impl<'a> Stepper<'a> {
    fn new(field: &'a dyn VectorField, theta: &'a [f64]) -> Self {
        let d = field.dim();
        Stepper {
            field,
            theta,
            k: vec![vec![0.0; d]; 7],
            y_stage: vec![0.0; d],
            abs_tol: 1.0,
            rel_tol: 1.0,
        }
    }

    /// One trial step from (t, y) with the first stage `f0` already given.
    /// Returns (y_new, f_new, error_estimate) unless a stage went non-finite.
    fn try_step(
        &mut self,
        t: f64,
        y: &[f64],
        f0: &[f64],
        h: f64,
    ) -> Option<(Vec<f64>, Vec<f64>, f64)> {
        let d = y.len();
        self.k[0].copy_from_slice(f0);
        for stage in 1..7 {
            for i in 0..d {
                let mut acc = 0.0;
                for (j, kj) in self.k.iter().enumerate().take(stage) {
                    let a = A[stage - 1][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                self.y_stage[i] = y[i] + h * acc;
            }
            let t_stage = t + C[stage] * h;
            let (_, tail) = self.k.split_at_mut(stage);
            self.field
                .eval(t_stage, &self.y_stage, self.theta, &mut tail[0]);
            if tail[0].iter().any(|v| !v.is_finite()) {
                return None;
            }
        }
        // 5th-order solution is stage 7's argument (FSAL): y + h Σ b_j k_j.
        let mut y_new = vec![0.0; d];
        let mut err = vec![0.0; d];
        for i in 0..d {
            let mut acc = 0.0;
            let mut eacc = 0.0;
            for j in 0..7 {
                acc += B[j] * self.k[j][i];
                eacc += E[j] * self.k[j][i];
            }
            y_new[i] = y[i] + h * acc;
            err[i] = h * eacc;
        }
        if y_new.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let f_new = self.k[6].clone();
        // Weighted RMS error norm.
        let mut norm2 = 0.0;
        for i in 0..d {
            let sc = self.abs_tol + self.rel_tol * y[i].abs().max(y_new[i].abs());
            let r = err[i] / sc;
            norm2 += r * r;
        }
        let err_norm = (norm2 / d as f64).sqrt();
        if !err_norm.is_finite() {
            return None;
        }
        Some((y_new, f_new, err_norm))
    }

    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) {
        self.field.eval(t, y, self.theta, out);
    }
}

impl Stepper<'_> {
    fn with_tols(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }
}

/// Adaptive solve of `ẏ = f_θ(t, y)` over `span` with dense output.
pub fn rk_solve(
    field: &dyn VectorField,
    theta: &[f64],
    y0: &[f64],
    span: (f64, f64),
    abs_tol: f64,
    rel_tol: f64,
) -> Result<RkSolution> {
    if !(abs_tol > 0.0 && rel_tol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let (t_start, t_end) = span;
    if !(t_end > t_start) {
        return Err(Error::InvalidArgument(format!(
            "degenerate integration span [{t_start}, {t_end}]"
        )));
    }
    let d = field.dim();
    if y0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "initial value has length {}, field dimension is {d}",
            y0.len()
        )));
    }

    let mut stepper = Stepper::new(field, theta).with_tols(abs_tol, rel_tol);
    let mut t = t_start;
    let mut y = y0.to_vec();
    let mut f = vec![0.0; d];
    stepper.eval(t, &y, &mut f);
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("vector field at the initial state".into()));
    }

    let span_len = t_end - t_start;
    let h_min = 1e-14 * span_len.max(t_end.abs());
    let mut h = initial_step(&stepper, t, &y, &f, t_end, abs_tol, rel_tol);
    let mut steps = Vec::new();
    let mut accepted = 0usize;
    let mut just_rejected = false;

    for _ in 0..MAX_STEPS {
        if t >= t_end {
            break;
        }
        h = h.min(t_end - t);
        if h < h_min {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        match stepper.try_step(t, &y, &f, h) {
            Some((y_new, f_new, err)) if err <= 1.0 => {
                steps.push(StepRecord {
                    t0: t,
                    h,
                    y0: DVector::from_column_slice(&y),
                    y1: DVector::from_column_slice(&y_new),
                    f0: DVector::from_column_slice(&f),
                    f1: DVector::from_column_slice(&f_new),
                });
                t += h;
                y = y_new;
                f = f_new;
                accepted += 1;
                let facmax = if just_rejected { 1.0 } else { 5.0 };
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, facmax);
                h *= fac;
                just_rejected = false;
            }
            Some((_, _, err)) => {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                h *= fac;
                just_rejected = true;
            }
            None => {
                h *= 0.25;
                just_rejected = true;
            }
        }
    }
    if t < t_end {
        return Err(Error::MaxStepsExceeded {
            t,
            max_steps: MAX_STEPS,
        });
    }
    Ok(RkSolution {
        steps,
        t_start,
        t_end,
        accepted_steps: accepted,
        abs_tol,
        rel_tol,
    })
}

/// Fixed-step solve with `n` equal steps of the fifth-order method (no
/// error control), used by order-verification tests.
pub fn rk_solve_fixed(
    field: &dyn VectorField,
    theta: &[f64],
    y0: &[f64],
    span: (f64, f64),
    n: usize,
) -> Result<RkSolution> {
    let (t_start, t_end) = span;
    if n == 0 || !(t_end > t_start) {
        return Err(Error::InvalidArgument("fixed-step solve needs n >= 1 steps".into()));
    }
    let d = field.dim();
    let mut stepper = Stepper::new(field, theta).with_tols(1.0, 1.0);
    let h = (t_end - t_start) / n as f64;
    let mut t = t_start;
    let mut y = y0.to_vec();
    let mut f = vec![0.0; d];
    stepper.eval(t, &y, &mut f);
    let mut steps = Vec::with_capacity(n);
    for i in 0..n {
        let (y_new, f_new, _) = stepper
            .try_step(t, &y, &f, h)
            .ok_or(Error::Diverged { step: i + 1, t })?;
        steps.push(StepRecord {
            t0: t,
            h,
            y0: DVector::from_column_slice(&y),
            y1: DVector::from_column_slice(&y_new),
            f0: DVector::from_column_slice(&f),
            f1: DVector::from_column_slice(&f_new),
        });
        t = t_start + (i + 1) as f64 * h;
        y = y_new;
        f = f_new;
    }
    Ok(RkSolution {
        steps,
        t_start,
        t_end,
        accepted_steps: n,
        abs_tol: f64::NAN,
        rel_tol: f64::NAN,
    })
}

fn initial_step(
    stepper: &Stepper,
    t: f64,
    y: &[f64],
    f: &[f64],
    t_end: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    let d = y.len();
    let sc: Vec<f64> = (0..d).map(|i| abs_tol + rel_tol * y[i].abs()).collect();
    let d0 = rms(y.iter().zip(&sc).map(|(v, s)| v / s), d);
    let d1 = rms(f.iter().zip(&sc).map(|(v, s)| v / s), d);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(t_end - t);
    // One explicit Euler step to probe the second derivative.
    let y1: Vec<f64> = (0..d).map(|i| y[i] + h0 * f[i]).collect();
    let mut f1 = vec![0.0; d];
    stepper.eval(t + h0, &y1, &mut f1);
    let d2 = rms(
        f1.iter().zip(f.iter()).zip(&sc).map(|((a, b), s)| (a - b) / s),
        d,
    ) / h0;
    let max_d = d1.max(d2);
    let h1 = if max_d <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / max_d).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end - t)
}

fn rms(it: impl Iterator<Item = f64>, n: usize) -> f64 {
    (it.map(|v| v * v).sum::<f64>() / n as f64).sqrt()
}

/// Sum of squared measurement residuals with the trajectory replaced by the
/// numerical solution: `Σ ‖H·ŷ(t) − u(t)‖²`. Integration failure yields +∞.
pub fn rk_lsq_loss(
    problem: &BenchmarkProblem,
    init_params: &[f64],
    ode_params: &[f64],
    obs: &ObservationSet,
) -> f64 {
    if obs.is_empty() {
        return 0.0;
    }
    let y0 = problem.init_map.build(init_params);
    let t_end = obs.times.last().copied().unwrap_or(problem.t0);
    let sol = match rk_solve(
        problem.field.as_ref(),
        ode_params,
        &y0,
        (problem.t0, t_end.max(problem.t0 + 1e-12)),
        FIT_ABS_TOL,
        FIT_REL_TOL,
    ) {
        Ok(s) => s,
        Err(_) => return f64::INFINITY,
    };
    let mut loss = 0.0;
    for (t, u) in obs.times.iter().zip(obs.values.iter()) {
        let yhat = sol.eval(*t);
        let r = u - &obs.h * yhat;
        loss += r.norm_squared();
    }
    if loss.is_finite() {
        loss
    } else {
        f64::INFINITY
    }
}
