//! Parameter estimation in ordinary differential equations by Gauss--Markov
//! regression with a physics-enhanced prior.
//!
//! The pipeline has two halves. A probabilistic numerical solver runs a
//! square-root Kalman filter against the ODE information operator and turns
//! the initial value problem into a backward Gauss--Markov chain — a prior
//! over trajectories that already encodes the dynamics
//! ([`solver::solve_ivp`]). Conditioning that prior on noisy, possibly
//! partial measurements is then plain linear-Gaussian regression: the
//! marginal likelihood comes out of a Kalman pass over the flipped time
//! axis in O(N) ([`regression::fenrir_nll`]), and maximising it over ODE
//! parameters, initial values, observation noise and prior diffusion is the
//! estimation method ([`estimate::fit`]).
//!
//! A classical adaptive Runge--Kutta integrator ([`rk`]) provides ground
//! truth for data generation and a non-linear least-squares baseline, and
//! [`bench`] drives the bundled benchmark problems ([`models`]) end to end.

pub mod bench;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod jet;
pub mod lbfgs;
pub mod linalg;
pub mod linearize;
pub mod models;
pub mod plot;
pub mod prior;
pub mod regression;
pub mod rk;
pub mod solver;

pub use error::{Error, Result};
