use std::ops::Range;

use crate::discretize::TimeSeries;
use crate::models::ParameterVector;
use crate::objective::{FidelityProblem, ProxAnchor};
use crate::{Error, Result};

use super::lbfgs::{minimize_smooth, MinimizerConfig};

/// Block structure of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// θ-step, then one joint step over all states.
    #[default]
    TwoBlock,
    /// θ-step, then the second half of the states, then the first half.
    Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    /// Multistep order; must match the problem's.
    pub order: usize,
    /// Stop when `|E(n) − E(n−1)|` or `E(n)` itself falls below this.
    pub outer_tolerance: f64,
    pub max_outer_iterations: usize,
    pub schedule: Schedule,
    pub inner: MinimizerConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            order: 3,
            outer_tolerance: 1e-8,
            max_outer_iterations: 5000,
            schedule: Schedule::TwoBlock,
            inner: MinimizerConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("λ must be finite and non-negative, got {}", self.lambda)));
        }
        if !(self.outer_tolerance > 0.0) {
            return Err(Error::Config("outer tolerance must be positive".into()));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::Config("max outer iterations must be positive".into()));
        }
        if !(1..=crate::discretize::MAX_ORDER).contains(&self.order) {
            return Err(Error::Config(format!("unsupported order {}", self.order)));
        }
        self.inner.validate()
    }
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `|E(n) − E(n−1)|` below tolerance.
    Converged,
    /// `E(n)` below tolerance: the states already satisfy the discretization.
    ZeroFidelity,
    /// The states stopped moving, or coincide with their own prediction.
    FixedPoint,
    MaxIterations,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::ZeroFidelity => "zero_fidelity",
            Termination::FixedPoint => "fixed_point",
            Termination::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// `E(X*(n), θ*(n))`.
    pub fidelity: f64,
    pub theta: Vec<f64>,
    /// Frobenius distance between the truth and the prediction from
    /// `(θ*(n), x*(n)₁)`; `+∞` if that prediction diverges.
    pub prediction_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    /// `E(Y, θ₀)`, the value before the first iteration.
    pub initial_fidelity: f64,
    pub entries: Vec<TraceEntry>,
    pub termination: Termination,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.entries.len()
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.fidelity).collect()
    }
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub theta: ParameterVector,
    /// The final state iterate `X*`.
    pub states: TimeSeries,
    /// `X̂`, stepped forward from `x*₁` with `θ*`; `None` if it diverged.
    pub predicted: Option<TimeSeries>,
    /// Index of the last finite predicted state when the prediction diverged.
    pub diverged_at: Option<usize>,
    pub trace: SolverTrace,
}

/// `argmin_θ E(X, θ)`, warm-started at `theta`.
///
/// The proximal term does not involve θ, so this is also the θ-block
/// minimizer of `F_n`.
pub fn theta_step(
    problem: &FidelityProblem,
    states: &TimeSeries,
    theta: &ParameterVector,
    config: &MinimizerConfig,
) -> Result<ParameterVector> {
    let x = states.as_slice();
    let mut ws = problem.workspace();
    let min = minimize_smooth(
        |th, g| problem.evaluate(x, th, &mut ws, None, Some(g)),
        theta.as_slice(),
        config,
    )?;
    ParameterVector::new(min.point)
}

/// `argmin_X F_n(X, θ)` over all states jointly, warm-started at `states`.
///
/// With `λ = 0` every forward-predicted trajectory is an exact minimizer
/// (`E = 0`); the quasi-Newton result is replaced by the prediction from
/// its own first state whenever that prediction exists.
pub fn x_step(
    problem: &FidelityProblem,
    anchor: &ProxAnchor,
    states: &TimeSeries,
    theta: &ParameterVector,
    config: &MinimizerConfig,
) -> Result<TimeSeries> {
    let next = x_block_step(problem, anchor, states, theta, 0..problem.len(), config)?;
    if anchor.lambda() != 0.0 {
        return Ok(next);
    }
    let x1 = crate::models::StateVector::try_from(next.state(0))?;
    match problem.forward_predict(theta, &x1) {
        Ok(exact) if problem.fidelity(&exact, theta)? < problem.fidelity(&next, theta)? => Ok(exact),
        Ok(_) | Err(Error::Diverged { .. }) => Ok(next),
        Err(e) => Err(e),
    }
}

/// Minimizes `F_n` over the states with time indices in `block`, holding
/// the others at their values in `states`.
pub fn x_block_step(
    problem: &FidelityProblem,
    anchor: &ProxAnchor,
    states: &TimeSeries,
    theta: &ParameterVector,
    block: Range<usize>,
    config: &MinimizerConfig,
) -> Result<TimeSeries> {
    let d = problem.dim();
    if block.is_empty() || block.end > problem.len() {
        return Err(Error::contract(format!("state block {block:?} is empty or out of range")));
    }
    let span = block.start * d..block.end * d;
    let lambda = anchor.lambda();
    let centre = &anchor.anchor().as_slice()[span.clone()];
    let mut full = states.as_slice().to_vec();
    let mut full_grad = vec![0.0; full.len()];
    let mut ws = problem.workspace();
    let th = theta.as_slice();
    let min = minimize_smooth(
        |z, g| {
            full[span.clone()].copy_from_slice(z);
            let e = problem.evaluate(&full, th, &mut ws, Some(&mut full_grad), None);
            let mut prox = 0.0;
            for (((gv, fg), zv), av) in g.iter_mut().zip(&full_grad[span.clone()]).zip(z).zip(centre) {
                let diff = zv - av;
                prox += diff * diff;
                *gv = fg + 2.0 * lambda * diff;
            }
            // Prox contributions outside the block are constant and omitted.
            e + lambda * prox
        },
        &states.as_slice()[span.clone()],
        config,
    )?;
    let mut out = states.as_slice().to_vec();
    out[span].copy_from_slice(&min.point);
    TimeSeries::from_column_slice(states.grid().clone(), d, &out)
}

/// The two-block proximal BCD loop started from `X = Y`.
pub fn bcd_prox(
    problem: &FidelityProblem,
    y: &TimeSeries,
    theta0: &ParameterVector,
    config: &SolverConfig,
) -> Result<EstimationResult> {
    let config = SolverConfig { schedule: Schedule::TwoBlock, ..config.clone() };
    estimate(problem, y, theta0, &config, None)
}

/// The three-block variant: θ, then the second half of the states, then
/// the first half, all sharing one anchor per outer iteration.
pub fn bcd_prox_split(
    problem: &FidelityProblem,
    y: &TimeSeries,
    theta0: &ParameterVector,
    config: &SolverConfig,
) -> Result<EstimationResult> {
    let config = SolverConfig { schedule: Schedule::Split, ..config.clone() };
    estimate(problem, y, theta0, &config, None)
}

/// Runs the outer loop with `config.schedule`. With `truth`, each trace
/// entry also carries the prediction error of that iterate.
pub fn estimate(
    problem: &FidelityProblem,
    y: &TimeSeries,
    theta0: &ParameterVector,
    config: &SolverConfig,
    truth: Option<&TimeSeries>,
) -> Result<EstimationResult> {
    config.validate()?;
    if config.order != problem.order() {
        return Err(Error::contract(format!(
            "solver order {} does not match problem order {}",
            config.order,
            problem.order()
        )));
    }
    for series in std::iter::once(y).chain(truth) {
        if series.dim() != problem.dim() || series.len() != problem.len() {
            return Err(Error::contract("series shape does not match the problem"));
        }
    }

    let half = problem.len() / 2;
    let mut states = y.clone();
    let mut theta = theta0.clone();
    let mut previous = problem.fidelity(&states, &theta)?;
    let initial_fidelity = previous;
    let mut entries = Vec::new();
    let mut termination = Termination::MaxIterations;

    for _ in 0..config.max_outer_iterations {
        let anchor = ProxAnchor::new(states.clone(), config.lambda)?;
        theta = theta_step(problem, &states, &theta, &config.inner)?;
        let next = match config.schedule {
            Schedule::TwoBlock => x_step(problem, &anchor, &states, &theta, &config.inner)?,
            Schedule::Split if half == 0 => x_step(problem, &anchor, &states, &theta, &config.inner)?,
            Schedule::Split => {
                let lower = x_block_step(problem, &anchor, &states, &theta, half..problem.len(), &config.inner)?;
                x_block_step(problem, &anchor, &lower, &theta, 0..half, &config.inner)?
            }
        };
        let fidelity = problem.fidelity(&next, &theta)?;
        let moved = max_abs_diff(next.as_slice(), states.as_slice());
        states = next;

        let x1 = crate::models::StateVector::try_from(states.state(0))?;
        let prediction = match problem.forward_predict(&theta, &x1) {
            Ok(p) => Some(p),
            Err(Error::Diverged { .. }) => None,
            Err(e) => return Err(e),
        };
        let prediction_error = truth.map(|t| match &prediction {
            Some(p) => frobenius_distance(t.as_slice(), p.as_slice()),
            None => f64::INFINITY,
        });
        entries.push(TraceEntry { fidelity, theta: theta.to_vec(), prediction_error });

        if fidelity < config.outer_tolerance {
            termination = Termination::ZeroFidelity;
            break;
        }
        if (fidelity - previous).abs() < config.outer_tolerance {
            termination = Termination::Converged;
            break;
        }
        let on_prediction = prediction
            .as_ref()
            .is_some_and(|p| max_abs_diff(p.as_slice(), states.as_slice()) <= FIXED_POINT_TOLERANCE);
        if moved <= FIXED_POINT_TOLERANCE || on_prediction {
            termination = Termination::FixedPoint;
            break;
        }
        previous = fidelity;
    }

    let x1 = crate::models::StateVector::try_from(states.state(0))?;
    let (predicted, diverged_at) = match problem.forward_predict(&theta, &x1) {
        Ok(p) => (Some(p), None),
        Err(Error::Diverged { index }) => (None, Some(index)),
        Err(e) => return Err(e),
    };
    Ok(EstimationResult {
        theta,
        states,
        predicted,
        diverged_at,
        trace: SolverTrace { initial_fidelity, entries, termination },
    })
}

const FIXED_POINT_TOLERANCE: f64 = 1e-12;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub(crate) fn frobenius_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
