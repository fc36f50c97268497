//! ODE models `dx/dt = f(x, θ)` with analytic Jacobians.
//!
//! Hot paths (objective and gradient evaluation) go through the slice-based
//! [`OdeModel`] methods. The checked free functions [`eval_field`],
//! [`eval_state_jacobian`] and [`eval_param_jacobian`] validate dimensions
//! and finiteness and are what callers outside the crate normally use.

mod benchmarks;
mod registry;

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub use benchmarks::{FitzHughNagumo, FitzHughNagumoLinear, Lorenz96, LotkaVolterra, Rossler};
pub use registry::{benchmark_registry, Benchmark, BENCHMARK_NAMES};

/// A parameterized vector field.
///
/// Implementations are immutable and pure: every method depends only on
/// its arguments, so a model can be shared freely between threads.
pub trait OdeModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// State dimension `d`.
    fn state_dim(&self) -> usize;

    /// Parameter dimension `p`.
    fn param_dim(&self) -> usize;

    /// Writes `f(x, θ)` into `out` (length `d`).
    fn field(&self, x: &[f64], theta: &[f64], out: &mut [f64]);

    /// Writes `∂f/∂x` (d×d) into `out`.
    fn state_jacobian(&self, x: &[f64], theta: &[f64], out: &mut DMatrix<f64>);

    /// Writes `∂f/∂θ` (d×p) into `out`.
    fn param_jacobian(&self, x: &[f64], theta: &[f64], out: &mut DMatrix<f64>);

    /// Accumulates `(∂f/∂x)ᵀ v` into `out`.
    fn state_vjp(&self, x: &[f64], theta: &[f64], v: &[f64], out: &mut [f64]) {
        let d = self.state_dim();
        let mut jac = DMatrix::zeros(d, d);
        self.state_jacobian(x, theta, &mut jac);
        for (k, o) in out.iter_mut().enumerate() {
            *o += jac.column(k).iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Accumulates `(∂f/∂θ)ᵀ v` into `out`.
    fn param_vjp(&self, x: &[f64], theta: &[f64], v: &[f64], out: &mut [f64]) {
        let mut jac = DMatrix::zeros(self.state_dim(), self.param_dim());
        self.param_jacobian(x, theta, &mut jac);
        for (l, o) in out.iter_mut().enumerate() {
            *o += jac.column(l).iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// The split `f(x, θ) = f₀(x) + f₁(x) θ`, when the field is linear in θ.
    fn linear_form(&self) -> Option<&dyn LinearInParams> {
        None
    }
}

/// The pieces of a field that is affine in its parameters.
pub trait LinearInParams {
    /// `f₀(x)`, length `d`.
    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// `f₁(x)`, a d×p matrix.
    fn coupling(&self, x: &[f64], out: &mut DMatrix<f64>);
}

macro_rules! checked_vector {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(DVector<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Result<Self> {
                if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NumericDomain(format!(
                        concat!($what, " entry {} is {}"),
                        bad, values[bad]
                    )));
                }
                Ok(Self(DVector::from_vec(values)))
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                self.0.as_slice()
            }

            pub fn values(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn to_vec(&self) -> Vec<f64> {
                self.0.as_slice().to_vec()
            }
        }

        impl TryFrom<&[f64]> for $name {
            type Error = Error;

            fn try_from(values: &[f64]) -> Result<Self> {
                Self::new(values.to_vec())
            }
        }
    };
}

checked_vector!(
    /// Model parameters θ ∈ ℝᵖ. All entries finite.
    ParameterVector,
    "parameter"
);
checked_vector!(
    /// A single state x ∈ ℝᵈ. All entries finite.
    StateVector,
    "state"
);

fn check_dims(model: &dyn OdeModel, x: &StateVector, theta: &ParameterVector) -> Result<()> {
    if x.len() != model.state_dim() {
        return Err(Error::contract(format!(
            "{}: state has length {}, expected {}",
            model.name(),
            x.len(),
            model.state_dim()
        )));
    }
    if theta.len() != model.param_dim() {
        return Err(Error::contract(format!(
            "{}: parameter vector has length {}, expected {}",
            model.name(),
            theta.len(),
            model.param_dim()
        )));
    }
    Ok(())
}

/// `f(x, θ)` with dimension and finiteness checks.
pub fn eval_field(
    model: &dyn OdeModel,
    x: &StateVector,
    theta: &ParameterVector,
) -> Result<StateVector> {
    check_dims(model, x, theta)?;
    let mut out = vec![0.0; model.state_dim()];
    model.field(x.as_slice(), theta.as_slice(), &mut out);
    StateVector::new(out)
}

/// `∂f/∂x` as a d×d matrix.
pub fn eval_state_jacobian(
    model: &dyn OdeModel,
    x: &StateVector,
    theta: &ParameterVector,
) -> Result<DMatrix<f64>> {
    check_dims(model, x, theta)?;
    let d = model.state_dim();
    let mut out = DMatrix::zeros(d, d);
    model.state_jacobian(x.as_slice(), theta.as_slice(), &mut out);
    Ok(out)
}

/// `∂f/∂θ` as a d×p matrix. Equals `f₁(x)` for models linear in θ.
pub fn eval_param_jacobian(
    model: &dyn OdeModel,
    x: &StateVector,
    theta: &ParameterVector,
) -> Result<DMatrix<f64>> {
    check_dims(model, x, theta)?;
    let mut out = DMatrix::zeros(model.state_dim(), model.param_dim());
    model.param_jacobian(x.as_slice(), theta.as_slice(), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests;
