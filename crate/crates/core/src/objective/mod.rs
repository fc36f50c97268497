//! Fidelity `E`, the proximal objective `F_n`, their analytic gradients and
//! the convexity diagnostics used to check the convergence premises.
//!
//! For states `x_1 … x_T` and order `m`, residual `i` compares `x_{i+1}`
//! with its multistep prediction of order `k = min(i, m)` from the states
//! before it:
//!
//! ```text
//! r_i = x_{i+1} − Σ_{j<k} a_j x_{i−j} − Δ_i Σ_{j<k} b_j f(x_{i−j}, θ)
//! E   = Σ_{i=1}^{T−1} ‖r_i‖²
//! F_n = E + λ ‖X − X*(n−1)‖²
//! ```
//!
//! Gradients are assembled by the chain rule through the residuals using
//! the model's vector–Jacobian products. Every reduction runs in a fixed
//! sequential order, so results are bit-stable.

mod diagnostics;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::discretize::{self, MultistepScheme, TimeGrid, TimeSeries};
use crate::models::{OdeModel, ParameterVector, StateVector};
use crate::{Error, Result};

pub use diagnostics::half_block_hessian_delta0;

/// The model, grid and discretization order that define `E`.
#[derive(Debug, Clone)]
pub struct FidelityProblem {
    model: Arc<dyn OdeModel>,
    grid: TimeGrid,
    schemes: Vec<MultistepScheme>,
}

/// The proximal centre `X*(n−1)` and its weight λ.
#[derive(Debug, Clone)]
pub struct ProxAnchor {
    anchor: TimeSeries,
    lambda: f64,
}

impl ProxAnchor {
    pub fn new(anchor: TimeSeries, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::contract(format!("λ must be finite and non-negative, got {lambda}")));
        }
        Ok(Self { anchor, lambda })
    }

    pub fn anchor(&self) -> &TimeSeries {
        &self.anchor
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Scratch buffers for [`FidelityProblem::evaluate`].
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    fields: Vec<f64>,
    weights: Vec<f64>,
    residual: Vec<f64>,
    scaled: Vec<f64>,
}

impl FidelityProblem {
    /// Orders above one need a uniform grid; the grid needs two points.
    pub fn new(model: Arc<dyn OdeModel>, grid: TimeGrid, order: usize) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::contract("the fidelity needs at least two time points"));
        }
        discretize::multistep::check_order_for_grid(order, &grid)?;
        let schemes = discretize::ramp_schemes(order)?;
        Ok(Self { model, grid, schemes })
    }

    pub fn model(&self) -> &dyn OdeModel {
        self.model.as_ref()
    }

    pub fn model_arc(&self) -> &Arc<dyn OdeModel> {
        &self.model
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.schemes.len()
    }

    /// State dimension `d`.
    pub fn dim(&self) -> usize {
        self.model.state_dim()
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub(crate) fn workspace(&self) -> Workspace {
        let d = self.dim();
        let t = self.len();
        Workspace {
            fields: vec![0.0; d * t],
            weights: vec![0.0; d * t],
            residual: vec![0.0; d],
            scaled: vec![0.0; d],
        }
    }

    fn check_series(&self, x: &TimeSeries) -> Result<()> {
        if x.dim() != self.dim() || x.len() != self.len() {
            return Err(Error::contract(format!(
                "series is {}x{}, problem expects {}x{}",
                x.dim(),
                x.len(),
                self.dim(),
                self.len()
            )));
        }
        Ok(())
    }

    fn check_theta(&self, theta: &ParameterVector) -> Result<()> {
        if theta.len() != self.model.param_dim() {
            return Err(Error::contract(format!(
                "parameter vector has length {}, model expects {}",
                theta.len(),
                self.model.param_dim()
            )));
        }
        Ok(())
    }

    fn check_anchor(&self, anchor: &ProxAnchor) -> Result<()> {
        self.check_series(&anchor.anchor)
    }

    /// `E(X, θ)` on raw column-major states, with optional gradients.
    ///
    /// Gradients are overwritten, not accumulated. Returns `+∞` when a
    /// field evaluation or residual is not finite; gradients are then
    /// unspecified.
    pub(crate) fn evaluate(
        &self,
        states: &[f64],
        theta: &[f64],
        ws: &mut Workspace,
        mut grad_states: Option<&mut [f64]>,
        mut grad_theta: Option<&mut [f64]>,
    ) -> f64 {
        let d = self.dim();
        let t = self.len();
        let m = self.schemes.len();
        let model = self.model.as_ref();
        debug_assert_eq!(states.len(), d * t);

        for (x, f) in states.chunks_exact(d).zip(ws.fields.chunks_exact_mut(d)) {
            model.field(x, theta, f);
        }
        let want_grad = grad_states.is_some() || grad_theta.is_some();
        if let Some(g) = grad_states.as_deref_mut() {
            g.fill(0.0);
        }
        if want_grad {
            ws.weights.fill(0.0);
        }

        let mut value = 0.0;
        for (i, &dt) in self.grid.gaps().iter().enumerate() {
            let scheme = &self.schemes[(i + 1).min(m) - 1];
            discretize::step_prediction(scheme, states, &ws.fields, d, i, dt, &mut ws.residual);
            for (r, x_next) in ws.residual.iter_mut().zip(&states[(i + 1) * d..(i + 2) * d]) {
                *r = x_next - *r;
                value += *r * *r;
            }
            if !want_grad {
                continue;
            }
            if let Some(g) = grad_states.as_deref_mut() {
                for (gr, r) in g[(i + 1) * d..(i + 2) * d].iter_mut().zip(&ws.residual) {
                    *gr += 2.0 * r;
                }
                for (j, &aj) in scheme.a().iter().enumerate() {
                    if aj != 0.0 {
                        let at = (i - j) * d;
                        for (gr, r) in g[at..at + d].iter_mut().zip(&ws.residual) {
                            *gr -= 2.0 * aj * r;
                        }
                    }
                }
            }
            for (j, &bj) in scheme.b().iter().enumerate() {
                let at = (i - j) * d;
                for (w, r) in ws.weights[at..at + d].iter_mut().zip(&ws.residual) {
                    *w += dt * bj * r;
                }
            }
        }
        if !value.is_finite() {
            return f64::INFINITY;
        }
        if !want_grad {
            return value;
        }

        // Each f(x_s) enters the residuals through the weights w_s, so
        // ∂E/∂x_s gets −2 J_x(x_s)ᵀ w_s and ∂E/∂θ gets −2 Σ_s J_θ(x_s)ᵀ w_s.
        if let Some(g) = grad_theta.as_deref_mut() {
            g.fill(0.0);
        }
        for s in 0..t {
            let w = &ws.weights[s * d..(s + 1) * d];
            if w.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (sc, wv) in ws.scaled.iter_mut().zip(w) {
                *sc = -2.0 * wv;
            }
            let x = &states[s * d..(s + 1) * d];
            if let Some(g) = grad_states.as_deref_mut() {
                model.state_vjp(x, theta, &ws.scaled, &mut g[s * d..(s + 1) * d]);
            }
            if let Some(g) = grad_theta.as_deref_mut() {
                model.param_vjp(x, theta, &ws.scaled, g);
            }
        }
        value
    }

    /// `E(X, θ) ≥ 0`; `+∞` if the field is not finite along `X`.
    pub fn fidelity(&self, x: &TimeSeries, theta: &ParameterVector) -> Result<f64> {
        self.check_series(x)?;
        self.check_theta(theta)?;
        let mut ws = self.workspace();
        Ok(self.evaluate(x.as_slice(), theta.as_slice(), &mut ws, None, None))
    }

    /// `F_n(X, θ) = E(X, θ) + λ ‖X − anchor‖²`.
    pub fn prox_objective(&self, anchor: &ProxAnchor, x: &TimeSeries, theta: &ParameterVector) -> Result<f64> {
        self.check_anchor(anchor)?;
        Ok(self.fidelity(x, theta)? + anchor.lambda * squared_distance(x.as_slice(), anchor.anchor.as_slice()))
    }

    /// `∂F_n/∂θ`, which equals `∂E/∂θ` because the proximal term does not
    /// involve θ.
    pub fn grad_theta(&self, x: &TimeSeries, theta: &ParameterVector) -> Result<DVector<f64>> {
        self.check_series(x)?;
        self.check_theta(theta)?;
        let mut ws = self.workspace();
        let mut g = vec![0.0; theta.len()];
        self.evaluate(x.as_slice(), theta.as_slice(), &mut ws, None, Some(&mut g));
        Ok(DVector::from_vec(g))
    }

    /// `∂F_n/∂X` as a d×T matrix, including `2λ (X − anchor)`.
    pub fn grad_states(&self, anchor: &ProxAnchor, x: &TimeSeries, theta: &ParameterVector) -> Result<DMatrix<f64>> {
        self.check_series(x)?;
        self.check_theta(theta)?;
        self.check_anchor(anchor)?;
        let mut ws = self.workspace();
        let mut g = vec![0.0; x.as_slice().len()];
        self.evaluate(x.as_slice(), theta.as_slice(), &mut ws, Some(&mut g), None);
        for ((gv, xv), av) in g.iter_mut().zip(x.as_slice()).zip(anchor.anchor.as_slice()) {
            *gv += 2.0 * anchor.lambda * (xv - av);
        }
        Ok(DMatrix::from_vec(self.dim(), self.len(), g))
    }

    /// Trajectory with `E = 0` for this problem's order, started at `x1`.
    pub fn forward_predict(&self, theta: &ParameterVector, x1: &StateVector) -> Result<TimeSeries> {
        discretize::forward_predict(self.model.as_ref(), theta, x1, &self.grid, self.order())
    }

    /// θ-Hessian of the Euler fidelity for a model affine in θ:
    /// `2 Σ_{i<T} f₁(x_i)ᵀ f₁(x_i) Δ_i²`.
    pub fn hessian_theta(&self, x: &TimeSeries) -> Result<DMatrix<f64>> {
        self.check_series(x)?;
        let linear = self.model.linear_form().ok_or_else(|| {
            Error::contract(format!("model `{}` is not affine in its parameters", self.model.name()))
        })?;
        if self.order() != 1 {
            return Err(Error::contract("the θ-Hessian diagnostic is defined for order 1 only"));
        }
        let (d, p) = (self.dim(), self.model.param_dim());
        let mut coupling = DMatrix::zeros(d, p);
        let mut h = DMatrix::zeros(p, p);
        for (i, &dt) in self.grid.gaps().iter().enumerate() {
            linear.coupling(x.state(i), &mut coupling);
            h += coupling.tr_mul(&coupling) * (2.0 * dt * dt);
        }
        Ok(h)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
