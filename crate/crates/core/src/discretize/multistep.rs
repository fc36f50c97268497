use super::{state_ok, TimeGrid, TimeSeries};
use crate::models::{OdeModel, ParameterVector, StateVector};
use crate::{Error, Result};

/// Highest Adams–Bashforth order provided.
pub const MAX_ORDER: usize = 5;

/// Explicit linear multistep rule
/// `x_{i+1} = Σ aⱼ x_{i−j} + Δ Σ bⱼ f(x_{i−j}, θ)`, `j = 0..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultistepScheme {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl MultistepScheme {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::contract(format!(
                "multistep coefficients need equal non-zero lengths (a: {}, b: {})",
                a.len(),
                b.len()
            )));
        }
        Ok(Self { a, b })
    }

    /// Number of past states the rule consumes.
    pub fn order(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }
}

/// Adams–Bashforth coefficients of order `m` on a uniform grid.
///
/// `bⱼ` is the integral over one step of the Lagrange basis polynomial
/// through the nodes `0, −1, …, −(m−1)` (in units of the step).
pub fn ab_coefficients(m: usize) -> Result<MultistepScheme> {
    if !(1..=MAX_ORDER).contains(&m) {
        return Err(Error::contract(format!(
            "Adams-Bashforth order must be in 1..={MAX_ORDER}, got {m}"
        )));
    }
    let b = (0..m)
        .map(|j| {
            // Coefficients of Π_{i≠j} (s + i), lowest degree first.
            let mut poly = vec![1.0];
            let mut denom = 1.0;
            for i in (0..m).filter(|&i| i != j) {
                let mut next = vec![0.0; poly.len() + 1];
                for (k, c) in poly.iter().enumerate() {
                    next[k] += c * i as f64;
                    next[k + 1] += c;
                }
                poly = next;
                denom *= i as f64 - j as f64;
            }
            let integral: f64 = poly.iter().enumerate().map(|(k, c)| c / (k + 1) as f64).sum();
            integral / denom
        })
        .collect();
    let mut a = vec![0.0; m];
    a[0] = 1.0;
    MultistepScheme::new(a, b)
}

/// Adams–Bashforth schemes of orders `1..=m`, for ramping up at the start
/// of a series.
pub(crate) fn ramp_schemes(m: usize) -> Result<Vec<MultistepScheme>> {
    (1..=m).map(ab_coefficients).collect()
}

/// Writes `Σ aⱼ x_{i−j} + Δ Σ bⱼ f_{i−j}` into `out`.
///
/// `states` and `fields` hold consecutive d-vectors; index `i` is the
/// newest state used and `scheme.order() <= i + 1`.
#[inline]
pub(crate) fn step_prediction(
    scheme: &MultistepScheme,
    states: &[f64],
    fields: &[f64],
    d: usize,
    i: usize,
    dt: f64,
    out: &mut [f64],
) {
    for (r, o) in out.iter_mut().enumerate() {
        let mut lin = 0.0;
        let mut slope = 0.0;
        for (j, (&aj, &bj)) in scheme.a.iter().zip(&scheme.b).enumerate() {
            let at = (i - j) * d + r;
            lin += aj * states[at];
            slope += bj * fields[at];
        }
        *o = lin + dt * slope;
    }
}

/// One multistep step from `recent` (newest first, `scheme.order()` states).
pub fn mstep_next(
    model: &dyn OdeModel,
    theta: &ParameterVector,
    scheme: &MultistepScheme,
    recent: &[StateVector],
    dt: f64,
) -> Result<StateVector> {
    let k = scheme.order();
    if recent.len() != k {
        return Err(Error::contract(format!(
            "order-{k} step needs {k} recent states, got {}",
            recent.len()
        )));
    }
    if !(dt >= 0.0) {
        return Err(Error::contract(format!("step must be non-negative, got {dt}")));
    }
    let d = model.state_dim();
    if theta.len() != model.param_dim() || recent.iter().any(|x| x.len() != d) {
        return Err(Error::contract("state or parameter dimension does not match the model"));
    }
    // Lay the window out oldest first so index k−1 is the newest state.
    let mut states = Vec::with_capacity(k * d);
    for x in recent.iter().rev() {
        states.extend_from_slice(x.as_slice());
    }
    let mut fields = vec![0.0; k * d];
    for (x, f) in states.chunks_exact(d).zip(fields.chunks_exact_mut(d)) {
        model.field(x, theta.as_slice(), f);
    }
    let mut out = vec![0.0; d];
    step_prediction(scheme, &states, &fields, d, k - 1, dt, &mut out);
    StateVector::new(out)
}

/// Multistep trajectory from `x1` over `gaps.len() + 1` points.
///
/// Fills `states` and `fields` (both `d·T` long, column-major). On
/// divergence returns the last grid index holding a valid state.
pub(crate) fn integrate_multistep(
    model: &dyn OdeModel,
    theta: &[f64],
    x1: &[f64],
    gaps: &[f64],
    schemes: &[MultistepScheme],
    states: &mut [f64],
    fields: &mut [f64],
) -> std::result::Result<(), usize> {
    let d = x1.len();
    let m = schemes.len();
    states[..d].copy_from_slice(x1);
    model.field(&states[..d], theta, &mut fields[..d]);
    if !fields[..d].iter().all(|v| v.is_finite()) {
        return Err(0);
    }
    for (i, &dt) in gaps.iter().enumerate() {
        let scheme = &schemes[(i + 1).min(m) - 1];
        let (done, rest) = states.split_at_mut((i + 1) * d);
        let next = &mut rest[..d];
        step_prediction(scheme, done, fields, d, i, dt, next);
        if !state_ok(next) || next.iter().any(|v| !v.is_finite()) {
            return Err(i);
        }
        let (x_next, f_next) = (&states[(i + 1) * d..(i + 2) * d], &mut fields[(i + 1) * d..(i + 2) * d]);
        model.field(x_next, theta, f_next);
        if !f_next.iter().all(|v| v.is_finite()) {
            return Err(i + 1);
        }
    }
    Ok(())
}

/// Predicted states: `x̂₁ = x1`, then repeated multistep steps with order
/// `min(i, m)` when producing the `(i+1)`-th state.
///
/// Orders above one require a uniform grid.
pub fn forward_predict(
    model: &dyn OdeModel,
    theta: &ParameterVector,
    x1: &StateVector,
    grid: &TimeGrid,
    m: usize,
) -> Result<TimeSeries> {
    let d = model.state_dim();
    if x1.len() != d || theta.len() != model.param_dim() {
        return Err(Error::contract("state or parameter dimension does not match the model"));
    }
    if grid.len() < 2 {
        return Err(Error::contract("forward prediction needs at least two grid points"));
    }
    check_order_for_grid(m, grid)?;
    let schemes = ramp_schemes(m)?;
    let mut states = vec![0.0; d * grid.len()];
    let mut fields = vec![0.0; d * grid.len()];
    integrate_multistep(
        model,
        theta.as_slice(),
        x1.as_slice(),
        grid.gaps(),
        &schemes,
        &mut states,
        &mut fields,
    )
    .map_err(|index| Error::Diverged { index })?;
    TimeSeries::from_column_slice(grid.clone(), d, &states)
}

pub(crate) fn check_order_for_grid(m: usize, grid: &TimeGrid) -> Result<()> {
    if m >= 2 && !grid.is_uniform() {
        return Err(Error::contract(format!(
            "order-{m} Adams-Bashforth needs a uniform grid; only order 1 accepts varying gaps"
        )));
    }
    Ok(())
}
