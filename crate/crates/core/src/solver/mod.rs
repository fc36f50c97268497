//! The inner quasi-Newton minimizer and the outer proximal BCD loops.
//!
//! Each outer iteration `n` fixes the anchor `X*(n−1)` and minimizes
//! `F_n` block by block, warm-starting every block at its previous value.
//! Because every block step is a descent step, `E(X*(n), θ*(n))` never
//! increases. After the loop the states are replaced for prediction
//! purposes by the trajectory stepped forward from the estimated initial
//! state, which satisfies `E = 0` exactly.

mod bcd;
mod lbfgs;

pub use bcd::{
    bcd_prox, bcd_prox_split, estimate, theta_step, x_block_step, x_step, EstimationResult, Schedule,
    SolverConfig, SolverTrace, Termination, TraceEntry,
};
pub(crate) use bcd::frobenius_distance;
pub use lbfgs::{minimize_smooth, MinimizerConfig, MinimizerStatus, Minimum};

#[cfg(test)]
mod tests;
