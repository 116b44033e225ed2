//! Shared test support: brute-force oracles and random test systems.
//!
//! Everything here is deliberately O(N³) dense linear algebra with no code
//! shared with the recursive implementations it checks.

#![allow(dead_code)]

pub mod oracle;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use fenrir::jet::{Arith, Jet};
use fenrir::linearize::VectorField;
use fenrir::regression::ObservationSet;

/// A fixed affine field `ẏ = L·y + b` with no free parameters.
pub struct FixedAffineField {
    pub l: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl VectorField for FixedAffineField {
    fn dim(&self) -> usize {
        self.l.nrows()
    }
    fn param_dim(&self) -> usize {
        0
    }
    fn eval(&self, _t: f64, y: &[f64], _theta: &[f64], out: &mut [f64]) {
        for r in 0..self.dim() {
            let mut acc = self.b[r];
            for c in 0..self.dim() {
                acc += self.l[(r, c)] * y[c];
            }
            out[r] = acc;
        }
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, _t: f64, _y: &[f64], _theta: &[f64], out: &mut DMatrix<f64>) {
        out.copy_from(&self.l);
    }
    fn eval_jet(&self, _t: &Jet, y: &[Jet], _theta: &[f64]) -> Option<Vec<Jet>> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d);
        for r in 0..d {
            let mut acc = y[0].mul_f64(self.l[(r, 0)]);
            for c in 1..d {
                acc = acc.add(&y[c].mul_f64(self.l[(r, c)]));
            }
            out.push(acc.add_f64(self.b[r]));
        }
        Some(out)
    }
    fn affine_parts(&self, _t: f64, _theta: &[f64]) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((self.l.clone(), self.b.clone()))
    }
    fn is_affine(&self) -> bool {
        true
    }
}

/// The logistic equation `ẏ = y(1−y)`, used by convergence studies.
pub struct Logistic;

impl VectorField for Logistic {
    fn dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        0
    }
    fn eval(&self, _t: f64, y: &[f64], _theta: &[f64], out: &mut [f64]) {
        out[0] = y[0] * (1.0 - y[0]);
    }
    fn has_jacobian(&self) -> bool {
        true
    }
    fn jacobian(&self, _t: f64, y: &[f64], _theta: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = 1.0 - 2.0 * y[0];
    }
    fn eval_jet(&self, _t: &Jet, y: &[Jet], _theta: &[f64]) -> Option<Vec<Jet>> {
        Some(vec![y[0].mul(&y[0].neg().add_f64(1.0))])
    }
}

/// A random stable-ish affine system together with a random grid.
pub struct RandomLinearCase {
    pub field: FixedAffineField,
    pub y0: Vec<f64>,
    pub grid: Vec<f64>,
    pub obs: ObservationSet,
    pub kappa: f64,
}

pub fn random_linear_case(rng: &mut ChaCha8Rng, d: usize, n_nodes: usize) -> RandomLinearCase {
    let l = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    // Pull eigenvalues left so trajectories stay O(1) on the span.
    let l = l - DMatrix::identity(d, d) * 0.5;
    let b = DVector::from_fn(d, |_, _| rng.random_range(-0.5..0.5));
    let y0: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();

    let mut grid = Vec::with_capacity(n_nodes);
    let mut t = 0.0;
    for _ in 0..n_nodes {
        t += rng.random_range(0.05..0.3);
        grid.push(t);
    }

    // Random observation subset (may include the initial node).
    let k = rng.random_range(1..=d);
    let h = DMatrix::from_fn(k, d, |_, _| rng.random_range(-1.0..1.0));
    let sigma2 = rng.random_range(0.01..1.0);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for node in 0..=n_nodes {
        if rng.random_bool(0.6) {
            let t = if node == 0 { 0.0 } else { grid[node - 1] };
            times.push(t);
            values.push(DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0)));
        }
    }
    if times.is_empty() {
        times.push(grid[0]);
        values.push(DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0)));
    }
    let obs = ObservationSet::new(times, values, h, DMatrix::identity(k, k) * sigma2).unwrap();
    RandomLinearCase {
        field: FixedAffineField { l, b },
        y0,
        grid,
        obs,
        kappa: rng.random_range(0.1..5.0),
    }
}
