//! Comparison methods: an extended Kalman filter on the joint
//! state–parameter vector, and shooting least squares over `(θ, x₁)`.

mod ekf;
mod shooting;

pub use ekf::{ekf_run, EkfConfig, EkfResult, JointState};
pub use shooting::{shooting_lsq, shooting_objective, ShootingResult};
