//! Bundled benchmark systems with their ground-truth configurations.
//!
//! Each problem carries the dynamics, true parameters, measurement matrix,
//! data grid, solver step, and the parameter space (bounds, transforms,
//! initialisation rules, optimisation schedule) used by the estimation
//! layer. User-defined models are named built-ins plus overrides; there is
//! deliberately no runtime expression parser.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::estimate::{InitRule, ParamDef, ParamSpace, Role, Schedule};
use crate::jet::{Arith, Jet};
use crate::linearize::VectorField;

/// How the initial ODE state is assembled from the init-value parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMap {
    /// Init parameters are the initial state.
    Direct,
    /// SEIR parameterisation: `(E0, I0) ↦ [1−E0−I0, E0, I0, 0]`.
    SeirFractions,
}

impl InitMap {
    pub fn build(&self, init_params: &[f64]) -> Vec<f64> {
        match self {
            InitMap::Direct => init_params.to_vec(),
            InitMap::SeirFractions => {
                let (e0, i0) = (init_params[0], init_params[1]);
                vec![1.0 - e0 - i0, e0, i0, 0.0]
            }
        }
    }

    pub fn state_dim(&self, n_init_params: usize) -> usize {
        match self {
            InitMap::Direct => n_init_params,
            InitMap::SeirFractions => 4,
        }
    }
}

/// A benchmark estimation problem: dynamics plus experiment configuration.
#[derive(Clone)]
pub struct BenchmarkProblem {
    pub name: String,
    pub field: Arc<dyn VectorField>,
    pub ode_params_true: Vec<f64>,
    pub init_params_true: Vec<f64>,
    pub init_map: InitMap,
    /// Measurement matrix (k×d): `u = H·y + v`.
    pub obs_matrix: DMatrix<f64>,
    pub sigma2_low: f64,
    pub sigma2_high: Option<f64>,
    pub data_times: Vec<f64>,
    /// Solver step for the physics-enhanced prior.
    pub dt: f64,
    pub t0: f64,
    pub space: ParamSpace,
    pub schedule: Schedule,
}

impl BenchmarkProblem {
    pub fn true_y0(&self) -> DVector<f64> {
        DVector::from_vec(self.init_map.build(&self.init_params_true))
    }

    pub fn sigma2(&self, high: bool) -> f64 {
        if high {
            self.sigma2_high.unwrap_or(self.sigma2_low)
        } else {
            self.sigma2_low
        }
    }

    /// Ground truth per parameter of `space` (None where no truth exists,
    /// e.g. the diffusion), used for error reporting.
    pub fn truth_for_errors(&self, sigma2: f64) -> Vec<Option<f64>> {
        let mut out = Vec::with_capacity(self.space.dim());
        let mut init_i = 0usize;
        let mut ode_i = 0usize;
        for def in &self.space.defs {
            out.push(match def.role {
                Role::InitValue => {
                    let v = self.init_params_true.get(init_i).copied();
                    init_i += 1;
                    v
                }
                Role::OdeParam => {
                    let v = self.ode_params_true.get(ode_i).copied();
                    ode_i += 1;
                    v
                }
                Role::NoiseVariance => Some(sigma2),
                Role::Diffusion => None,
            });
        }
        out
    }
}

fn grid(step: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 * step).collect()
}

// ---------------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------------

/// Scalar test field `f(t, y) = θ·y`.
pub struct ScalarLinear {
    pub lambda_index: usize,
}

impl VectorField for ScalarLinear {
    fn dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        self.lambda_index + 1
    }
    fn eval(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut [f64]) {
        out[0] = theta[self.lambda_index] * y[0];
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, _t: f64, _y: &[f64], theta: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = theta[self.lambda_index];
    }
    fn eval_jet(&self, _t: &Jet, y: &[Jet], theta: &[f64]) -> Option<Vec<Jet>> {
        Some(vec![y[0].mul_f64(theta[self.lambda_index])])
    }
    fn affine_parts(&self, _t: f64, theta: &[f64]) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((
            DMatrix::from_element(1, 1, theta[self.lambda_index]),
            DVector::zeros(1),
        ))
    }
    fn is_affine(&self) -> bool {
        true
    }
}

/// Predator-prey dynamics. The `printed_form` switch replaces the classical
/// predator loss term `−γ·y₂` by `−γ·y₁`, matching one printed variant of
/// the benchmark; the classical form is the default.
pub struct LotkaVolterra {
    pub printed_form: bool,
}

impl LotkaVolterra {
    fn rhs<S: Arith>(&self, y: &[S], th: &[f64]) -> [S; 2] {
        let (alpha, beta, gamma, delta) = (th[0], th[1], th[2], th[3]);
        let y1y2 = y[0].mul(&y[1]);
        let dy1 = y[0].mul_f64(alpha).sub(&y1y2.mul_f64(beta));
        let decay = if self.printed_form { &y[0] } else { &y[1] };
        let dy2 = decay.mul_f64(-gamma).add(&y1y2.mul_f64(delta));
        [dy1, dy2]
    }
}

impl VectorField for LotkaVolterra {
    fn dim(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        4
    }
    fn eval(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut [f64]) {
        let r = self.rhs(y, theta);
        out[0] = r[0];
        out[1] = r[1];
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut DMatrix<f64>) {
        let (alpha, beta, gamma, delta) = (theta[0], theta[1], theta[2], theta[3]);
        out[(0, 0)] = alpha - beta * y[1];
        out[(0, 1)] = -beta * y[0];
        if self.printed_form {
            out[(1, 0)] = -gamma + delta * y[1];
            out[(1, 1)] = delta * y[0];
        } else {
            out[(1, 0)] = delta * y[1];
            out[(1, 1)] = -gamma + delta * y[0];
        }
    }
    fn eval_jet(&self, _t: &Jet, y: &[Jet], theta: &[f64]) -> Option<Vec<Jet>> {
        Some(self.rhs(y, theta).to_vec())
    }
}

/// Lotka--Volterra model-selection candidate: each equation is either the
/// true one or the deliberately wrong alternative
/// (`ẏ₁ = αy₁² − βy₂`, `ẏ₂ = −γy₂`). Parameters are `(α, β, γ)` plus `δ`
/// only when the second equation is the true one.
pub struct LvCandidate {
    pub first_correct: bool,
    pub second_correct: bool,
    pub printed_form: bool,
}

impl LvCandidate {
    fn rhs<S: Arith>(&self, y: &[S], th: &[f64]) -> [S; 2] {
        let (alpha, beta, gamma) = (th[0], th[1], th[2]);
        let dy1 = if self.first_correct {
            let y1y2 = y[0].mul(&y[1]);
            y[0].mul_f64(alpha).sub(&y1y2.mul_f64(beta))
        } else {
            y[0].mul(&y[0]).mul_f64(alpha).sub(&y[1].mul_f64(beta))
        };
        let dy2 = if self.second_correct {
            let delta = th[3];
            let y1y2 = y[0].mul(&y[1]);
            let decay = if self.printed_form { &y[0] } else { &y[1] };
            decay.mul_f64(-gamma).add(&y1y2.mul_f64(delta))
        } else {
            y[1].mul_f64(-gamma)
        };
        [dy1, dy2]
    }
}

impl VectorField for LvCandidate {
    fn dim(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        3 + self.second_correct as usize
    }
    fn eval(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut [f64]) {
        let r = self.rhs(y, theta);
        out[0] = r[0];
        out[1] = r[1];
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut DMatrix<f64>) {
        let (alpha, beta, gamma) = (theta[0], theta[1], theta[2]);
        if self.first_correct {
            out[(0, 0)] = alpha - beta * y[1];
            out[(0, 1)] = -beta * y[0];
        } else {
            out[(0, 0)] = 2.0 * alpha * y[0];
            out[(0, 1)] = -beta;
        }
        if self.second_correct {
            let delta = theta[3];
            if self.printed_form {
                out[(1, 0)] = -gamma + delta * y[1];
                out[(1, 1)] = delta * y[0];
            } else {
                out[(1, 0)] = delta * y[1];
                out[(1, 1)] = -gamma + delta * y[0];
            }
        } else {
            out[(1, 0)] = 0.0;
            out[(1, 1)] = -gamma;
        }
    }
    fn eval_jet(&self, _t: &Jet, y: &[Jet], theta: &[f64]) -> Option<Vec<Jet>> {
        Some(self.rhs(y, theta).to_vec())
    }
}

/// FitzHugh--Nagumo neuronal model, parameters `(a, b, c)`.
pub struct FitzHughNagumo;

impl FitzHughNagumo {
    fn rhs<S: Arith>(&self, y: &[S], th: &[f64]) -> [S; 2] {
        let (a, b, c) = (th[0], th[1], th[2]);
        let cube = y[0].mul(&y[0]).mul(&y[0]);
        let dy1 = y[0].sub(&cube.mul_f64(1.0 / 3.0)).add(&y[1]).mul_f64(c);
        let dy2 = y[0].add_f64(-a).sub(&y[1].mul_f64(b)).mul_f64(-1.0 / c);
        [dy1, dy2]
    }
}

impl VectorField for FitzHughNagumo {
    fn dim(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        3
    }
    fn eval(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut [f64]) {
        let r = self.rhs(y, theta);
        out[0] = r[0];
        out[1] = r[1];
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut DMatrix<f64>) {
        let (_a, b, c) = (theta[0], theta[1], theta[2]);
        out[(0, 0)] = c * (1.0 - y[0] * y[0]);
        out[(0, 1)] = c;
        out[(1, 0)] = -1.0 / c;
        out[(1, 1)] = b / c;
    }
    fn eval_jet(&self, _t: &Jet, y: &[Jet], theta: &[f64]) -> Option<Vec<Jet>> {
        Some(self.rhs(y, theta).to_vec())
    }
}

/// Compartmental SEIR model, state `(S, E, I, R)` as population fractions,
/// parameters `(β_E, γ, λ)`. The direct infection rate β_I is held fixed.
pub struct Seir {
    pub beta_i: f64,
}

impl Seir {
    fn rhs<S: Arith>(&self, y: &[S], th: &[f64]) -> [S; 4] {
        let (beta_e, gamma, lambda) = (th[0], th[1], th[2]);
        let infections = y[0]
            .mul(&y[1])
            .mul_f64(beta_e)
            .add(&y[0].mul(&y[2]).mul_f64(self.beta_i));
        let ds = infections.neg();
        let de = infections.sub(&y[1].mul_f64(gamma));
        let di = y[1].mul_f64(gamma).sub(&y[2].mul_f64(lambda));
        let dr = y[2].mul_f64(lambda);
        [ds, de, di, dr]
    }
}

impl VectorField for Seir {
    fn dim(&self) -> usize {
        4
    }
    fn param_dim(&self) -> usize {
        3
    }
    fn eval(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut [f64]) {
        let r = self.rhs(y, theta);
        out.copy_from_slice(&r);
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut DMatrix<f64>) {
        let (beta_e, gamma, lambda) = (theta[0], theta[1], theta[2]);
        out.fill(0.0);
        let dinf_ds = beta_e * y[1] + self.beta_i * y[2];
        let dinf_de = beta_e * y[0];
        let dinf_di = self.beta_i * y[0];
        out[(0, 0)] = -dinf_ds;
        out[(0, 1)] = -dinf_de;
        out[(0, 2)] = -dinf_di;
        out[(1, 0)] = dinf_ds;
        out[(1, 1)] = dinf_de - gamma;
        out[(1, 2)] = dinf_di;
        out[(2, 1)] = gamma;
        out[(2, 2)] = -lambda;
        out[(3, 2)] = lambda;
    }
    fn eval_jet(&self, _t: &Jet, y: &[Jet], theta: &[f64]) -> Option<Vec<Jet>> {
        Some(self.rhs(y, theta).to_vec())
    }
}

/// Planar pendulum in first-order form, state `(angle, velocity)`,
/// parameter `L` (length).
pub struct Pendulum {
    pub gravity: f64,
}

impl Pendulum {
    fn rhs<S: Arith>(&self, y: &[S], th: &[f64]) -> [S; 2] {
        let dy1 = y[1].clone();
        let dy2 = y[0].sin().mul_f64(-self.gravity / th[0]);
        [dy1, dy2]
    }
}

impl VectorField for Pendulum {
    fn dim(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn eval(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut [f64]) {
        let r = self.rhs(y, theta);
        out[0] = r[0];
        out[1] = r[1];
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = 0.0;
        out[(0, 1)] = 1.0;
        out[(1, 0)] = -self.gravity / theta[0] * y[0].cos();
        out[(1, 1)] = 0.0;
    }
    fn eval_jet(&self, _t: &Jet, y: &[Jet], theta: &[f64]) -> Option<Vec<Jet>> {
        Some(self.rhs(y, theta).to_vec())
    }
}

/// Damped rotation `ẏ = [[−a, b], [−b, −a]]·y`: an affine field with a
/// globally stable flow for a ≥ 0, used as the linear test system.
pub struct LinearTest;

impl LinearTest {
    fn rhs<S: Arith>(&self, y: &[S], th: &[f64]) -> [S; 2] {
        let (a, b) = (th[0], th[1]);
        [
            y[0].mul_f64(-a).add(&y[1].mul_f64(b)),
            y[0].mul_f64(-b).add(&y[1].mul_f64(-a)),
        ]
    }
}

impl VectorField for LinearTest {
    fn dim(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        2
    }
    fn eval(&self, _t: f64, y: &[f64], theta: &[f64], out: &mut [f64]) {
        let r = self.rhs(y, theta);
        out[0] = r[0];
        out[1] = r[1];
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, _t: f64, _y: &[f64], theta: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = -theta[0];
        out[(0, 1)] = theta[1];
        out[(1, 0)] = -theta[1];
        out[(1, 1)] = -theta[0];
    }
    fn eval_jet(&self, _t: &Jet, y: &[Jet], theta: &[f64]) -> Option<Vec<Jet>> {
        Some(self.rhs(y, theta).to_vec())
    }
    fn affine_parts(&self, _t: f64, theta: &[f64]) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let (a, b) = (theta[0], theta[1]);
        Some((
            DMatrix::from_row_slice(2, 2, &[-a, b, -b, -a]),
            DVector::zeros(2),
        ))
    }
    fn is_affine(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// Problem configurations
// ---------------------------------------------------------------------------

fn scale_space(
    init: Vec<ParamDef>,
    ode: Vec<ParamDef>,
    sigma2_bounds: (f64, f64),
    kappa_bounds: (f64, f64),
) -> ParamSpace {
    let mut defs = init;
    defs.extend(ode);
    defs.push(ParamDef::log_bounded(
        "sigma2",
        Role::NoiseVariance,
        sigma2_bounds.0,
        sigma2_bounds.1,
        InitRule::Fixed(1.0),
    ));
    defs.push(ParamDef::log_bounded(
        "kappa",
        Role::Diffusion,
        kappa_bounds.0,
        kappa_bounds.1,
        InitRule::Fixed(1.0),
    ));
    ParamSpace { defs }
}

pub fn lotka_volterra() -> BenchmarkProblem {
    let init = vec![
        ParamDef::bounded("y0_1", Role::InitValue, 0.0, 100.0, InitRule::Observed { obs_row: 0 }),
        ParamDef::bounded("y0_2", Role::InitValue, 0.0, 100.0, InitRule::Observed { obs_row: 1 }),
    ];
    let ode = ["alpha", "beta", "gamma", "delta"]
        .iter()
        .map(|n| ParamDef::bounded(n, Role::OdeParam, 0.0, 100.0, InitRule::FoldedStdNormal))
        .collect();
    BenchmarkProblem {
        name: "lotka-volterra".into(),
        field: Arc::new(LotkaVolterra { printed_form: false }),
        ode_params_true: vec![2.0, 1.0, 4.0, 1.0],
        init_params_true: vec![5.0, 3.0],
        init_map: InitMap::Direct,
        obs_matrix: DMatrix::identity(2, 2),
        sigma2_low: 0.01,
        sigma2_high: Some(0.25),
        data_times: grid(0.1, 20),
        dt: 5e-3,
        t0: 0.0,
        space: scale_space(init, ode, (1e-6, 1e2), (1e-20, 1e50)),
        schedule: Schedule::NoiseDiffusionThenJoint,
    }
}

pub fn fitzhugh_nagumo() -> BenchmarkProblem {
    let init = vec![
        ParamDef::bounded("y0_1", Role::InitValue, -100.0, 100.0, InitRule::Observed { obs_row: 0 }),
        ParamDef::bounded("y0_2", Role::InitValue, -100.0, 100.0, InitRule::Observed { obs_row: 1 }),
    ];
    let ode = ["a", "b", "c"]
        .iter()
        .map(|n| ParamDef::bounded(n, Role::OdeParam, 0.0, 100.0, InitRule::FoldedStdNormal))
        .collect();
    BenchmarkProblem {
        name: "fitzhugh-nagumo".into(),
        field: Arc::new(FitzHughNagumo),
        ode_params_true: vec![0.2, 0.2, 3.0],
        init_params_true: vec![-1.0, 1.0],
        init_map: InitMap::Direct,
        obs_matrix: DMatrix::identity(2, 2),
        sigma2_low: 0.005,
        sigma2_high: Some(0.05),
        data_times: grid(0.5, 20),
        dt: 1e-2,
        t0: 0.0,
        space: scale_space(init, ode, (1e-6, 1e2), (1e-20, 1e50)),
        schedule: Schedule::JointOnly,
    }
}

pub fn seir() -> BenchmarkProblem {
    let init = vec![
        ParamDef::bounded("E0", Role::InitValue, 0.0, 1.0, InitRule::FoldedNormal { sd: 0.1 }),
        ParamDef::bounded("I0", Role::InitValue, 0.0, 1.0, InitRule::FoldedNormal { sd: 0.1 }),
    ];
    let ode = ["beta_E", "gamma", "lambda"]
        .iter()
        .map(|n| ParamDef::bounded(n, Role::OdeParam, 0.0, 1.0, InitRule::UniformUnit))
        .collect();
    // Only infected and recovered fractions are measured.
    let mut h = DMatrix::zeros(2, 4);
    h[(0, 2)] = 1.0;
    h[(1, 3)] = 1.0;
    BenchmarkProblem {
        name: "seir".into(),
        field: Arc::new(Seir { beta_i: 0.0 }),
        ode_params_true: vec![0.5, 1.0 / 5.0, 1.0 / 21.0],
        init_params_true: vec![1e-4, 1e-5],
        init_map: InitMap::SeirFractions,
        obs_matrix: h,
        sigma2_low: 5e-4,
        sigma2_high: None,
        data_times: (30..=100).map(|i| i as f64).collect(),
        dt: 0.2,
        t0: 0.0,
        space: scale_space(init, ode, (1e-6, 1e2), (1e-20, 1e20)),
        schedule: Schedule::JointOnly,
    }
}

pub fn pendulum() -> BenchmarkProblem {
    let init = vec![
        // The angle is unobserved; starting it at the resting position is
        // the problem-specific initialisation rule.
        ParamDef::bounded("y0_1", Role::InitValue, -100.0, 100.0, InitRule::Fixed(0.0)),
        ParamDef::bounded("y0_2", Role::InitValue, -100.0, 100.0, InitRule::Observed { obs_row: 0 }),
    ];
    let ode = vec![ParamDef::bounded(
        "L",
        Role::OdeParam,
        0.0,
        100.0,
        InitRule::FoldedStdNormal,
    )];
    BenchmarkProblem {
        name: "pendulum".into(),
        field: Arc::new(Pendulum { gravity: 9.81 }),
        ode_params_true: vec![1.0],
        init_params_true: vec![0.0, std::f64::consts::FRAC_PI_2],
        init_map: InitMap::Direct,
        obs_matrix: DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        sigma2_low: 0.1,
        sigma2_high: None,
        data_times: grid(0.01, 1000),
        dt: 0.1,
        t0: 0.0,
        space: scale_space(init, ode, (1e-8, 1e4), (1e-20, 1e50)),
        schedule: Schedule::NoiseDiffusionThenJoint,
    }
}

/// Model-selection candidate `M_ij`; `(true, true)` is the true system.
pub fn lv_candidate(first_correct: bool, second_correct: bool) -> BenchmarkProblem {
    if first_correct && second_correct {
        return lotka_volterra();
    }
    let lv = lotka_volterra();
    let mut names = vec!["alpha", "beta", "gamma"];
    let mut truth = vec![2.0, 1.0, 4.0];
    if second_correct {
        names.push("delta");
        truth.push(1.0);
    }
    let ode = names
        .iter()
        .map(|n| ParamDef::bounded(n, Role::OdeParam, 0.0, 100.0, InitRule::FoldedStdNormal))
        .collect();
    let init = vec![
        ParamDef::bounded("y0_1", Role::InitValue, 0.0, 100.0, InitRule::Observed { obs_row: 0 }),
        ParamDef::bounded("y0_2", Role::InitValue, 0.0, 100.0, InitRule::Observed { obs_row: 1 }),
    ];
    BenchmarkProblem {
        name: format!("lv-m{}{}", first_correct as u8, second_correct as u8),
        field: Arc::new(LvCandidate {
            first_correct,
            second_correct,
            printed_form: false,
        }),
        ode_params_true: truth,
        space: scale_space(init, ode, (1e-6, 1e2), (1e-20, 1e50)),
        schedule: Schedule::JointOnly,
        ..lv
    }
}

pub fn linear_test() -> BenchmarkProblem {
    let init = vec![
        ParamDef::bounded("y0_1", Role::InitValue, -100.0, 100.0, InitRule::Observed { obs_row: 0 }),
        ParamDef::bounded("y0_2", Role::InitValue, -100.0, 100.0, InitRule::Observed { obs_row: 1 }),
    ];
    let ode = ["a", "b"]
        .iter()
        .map(|n| ParamDef::bounded(n, Role::OdeParam, 0.0, 100.0, InitRule::FoldedStdNormal))
        .collect();
    BenchmarkProblem {
        name: "linear-test".into(),
        field: Arc::new(LinearTest),
        ode_params_true: vec![0.5, 2.0],
        init_params_true: vec![1.0, 0.0],
        init_map: InitMap::Direct,
        obs_matrix: DMatrix::identity(2, 2),
        sigma2_low: 0.01,
        sigma2_high: None,
        data_times: grid(0.25, 20),
        dt: 0.05,
        t0: 0.0,
        space: scale_space(init, ode, (1e-6, 1e2), (1e-20, 1e50)),
        schedule: Schedule::JointOnly,
    }
}

pub fn registry_names() -> &'static [&'static str] {
    &[
        "lotka-volterra",
        "fitzhugh-nagumo",
        "seir",
        "pendulum",
        "lv-m10",
        "lv-m01",
        "lv-m00",
        "linear-test",
    ]
}

pub fn by_name(name: &str) -> Option<BenchmarkProblem> {
    match name {
        "lotka-volterra" | "lv" | "lv-m11" => Some(lotka_volterra()),
        "fitzhugh-nagumo" | "fhn" => Some(fitzhugh_nagumo()),
        "seir" => Some(seir()),
        "pendulum" => Some(pendulum()),
        "lv-m10" => Some(lv_candidate(true, false)),
        "lv-m01" => Some(lv_candidate(false, true)),
        "lv-m00" => Some(lv_candidate(false, false)),
        "linear-test" => Some(linear_test()),
        _ => None,
    }
}

/// The four model-selection candidates in registry order.
pub fn model_selection_candidates() -> Vec<BenchmarkProblem> {
    vec![
        lv_candidate(true, true),
        lv_candidate(true, false),
        lv_candidate(false, true),
        lv_candidate(false, false),
    ]
}
