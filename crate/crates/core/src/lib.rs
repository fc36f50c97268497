//! Joint filtering and parameter estimation for ODE models by block
//! coordinate descent on a proximal fidelity objective.
//!
//! Given noisy observations `Y` of a system `dx/dt = f(x, θ)` on a time
//! grid, the solver alternates between a parameter step and a proximal
//! state step on
//!
//! ```text
//! F_n(X, θ) = E(X, θ) + λ ‖X − X*(n−1)‖²
//! ```
//!
//! where `E` is the sum of squared residuals of an explicit multistep
//! (Adams–Bashforth) discretization. After convergence a trajectory that
//! satisfies the discretization exactly is produced by stepping forward
//! from the estimated initial state.
//!
//! Module map:
//!
//! * [`models`]: the ODE abstraction and the four benchmark systems.
//! * [`discretize`]: time grids, Adams–Bashforth schemes, forward
//!   prediction and a fifth-order Runge–Kutta ground-truth integrator.
//! * [`objective`]: fidelity, proximal objective, analytic gradients and
//!   convexity diagnostics.
//! * [`solver`]: L-BFGS inner minimizer and the two outer schedules.
//! * [`baselines`]: joint-state EKF and shooting least squares.
//! * [`harness`]: datasets, metrics, experiment configs and CSV output.

pub mod baselines;
pub mod discretize;
mod error;
pub mod harness;
pub mod models;
pub mod objective;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
