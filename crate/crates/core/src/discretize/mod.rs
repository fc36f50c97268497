//! Time grids, explicit multistep schemes and trajectory integration.

mod grid;
pub(crate) mod multistep;
mod runge_kutta;

pub use grid::{TimeGrid, TimeSeries};
pub use multistep::{ab_coefficients, forward_predict, mstep_next, MultistepScheme, MAX_ORDER};
pub use runge_kutta::rk_integrate;

pub(crate) use multistep::{ramp_schemes, step_prediction};

/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

#[inline]
pub(crate) fn state_ok(x: &[f64]) -> bool {
    x.iter().all(|v| v.abs() <= DIVERGENCE_LIMIT)
}
