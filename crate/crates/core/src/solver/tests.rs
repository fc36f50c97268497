use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::discretize::{rk_integrate, TimeGrid, TimeSeries};
use crate::models::{benchmark_registry, LinearInParams, OdeModel, ParameterVector, StateVector};
use crate::objective::{FidelityProblem, ProxAnchor};
use crate::rng::{self, Purpose};

struct Fixture {
    problem: FidelityProblem,
    clean: TimeSeries,
    noisy: TimeSeries,
    theta_true: ParameterVector,
}

fn fixture(name: &str, order: usize, variance: f64, seed: u64) -> Fixture {
    let b = benchmark_registry(name, seed).unwrap();
    let grid = b.grid().unwrap();
    let clean = rk_integrate(b.model.as_ref(), &b.theta_true, &b.initial_state, &grid).unwrap();
    let mut r = rng::stream(seed, 0, Purpose::ObservationNoise);
    let noisy: Vec<f64> = clean
        .as_slice()
        .iter()
        .map(|v| v + variance.sqrt() * r.sample::<f64, _>(StandardNormal))
        .collect();
    Fixture {
        problem: FidelityProblem::new(b.model.clone(), grid.clone(), order).unwrap(),
        noisy: TimeSeries::from_column_slice(grid, clean.dim(), &noisy).unwrap(),
        clean,
        theta_true: b.theta_true,
    }
}

fn shifted(theta: &ParameterVector, by: f64) -> ParameterVector {
    ParameterVector::new(theta.as_slice().iter().map(|t| t + by).collect()).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Normal equations of the Euler fidelity for a model affine in θ:
/// `(Σ Δ² f₁ᵀf₁) θ = Σ Δ f₁ᵀ (x_{i+1} − x_i − Δ f₀)`.
fn euler_least_squares(lin: &dyn LinearInParams, x: &TimeSeries, p: usize) -> DVector<f64> {
    let d = x.dim();
    let mut lhs = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    let mut f1 = DMatrix::zeros(d, p);
    let mut f0 = vec![0.0; d];
    for (i, &dt) in x.grid().gaps().iter().enumerate() {
        lin.coupling(x.state(i), &mut f1);
        lin.drift(x.state(i), &mut f0);
        let target = DVector::from_iterator(
            d,
            (0..d).map(|k| x.state(i + 1)[k] - x.state(i)[k] - dt * f0[k]),
        );
        lhs += f1.tr_mul(&f1) * (dt * dt);
        rhs += f1.tr_mul(&target) * dt;
    }
    lhs.lu().solve(&rhs).unwrap()
}

#[test]
fn theta_step_matches_normal_equations() {
    let fx = fixture("rossler", 1, 0.5, 3);
    let lin = fx.problem.model().linear_form().unwrap();
    let want = euler_least_squares(lin, &fx.noisy, 3);
    let got = theta_step(&fx.problem, &fx.noisy, &fx.theta_true, &MinimizerConfig::default()).unwrap();
    for (g, w) in got.as_slice().iter().zip(want.iter()) {
        assert!((g - w).abs() <= 1e-6, "{g} vs {w}");
    }
}

#[test]
fn theta_step_recovers_least_squares_fit_on_clean_data() {
    let fx = fixture("lotka_volterra", 1, 0.0, 0);
    let lin = fx.problem.model().linear_form().unwrap();
    let want = euler_least_squares(lin, &fx.clean, 4);
    let start = shifted(&fx.theta_true, 3.0);
    let got = theta_step(&fx.problem, &fx.clean, &start, &MinimizerConfig::default()).unwrap();
    for (g, w) in got.as_slice().iter().zip(want.iter()) {
        assert!((g - w).abs() <= 1e-3, "{g} vs {w}");
    }
}

#[test]
fn theta_step_keeps_theta_on_predicted_states() {
    let fx = fixture("fitzhugh_nagumo", 3, 0.0, 0);
    let x1 = StateVector::try_from(fx.clean.state(0)).unwrap();
    let xhat = fx.problem.forward_predict(&fx.theta_true, &x1).unwrap();
    let got = theta_step(&fx.problem, &xhat, &fx.theta_true, &MinimizerConfig::default()).unwrap();
    assert_eq!(got, fx.theta_true);
}

#[test]
fn theta_step_is_warm_start_consistent() {
    let fx = fixture("fitzhugh_nagumo", 3, 0.5, 1);
    let cfg = MinimizerConfig::default();
    let once = theta_step(&fx.problem, &fx.noisy, &shifted(&fx.theta_true, 0.3), &cfg).unwrap();
    let twice = theta_step(&fx.problem, &fx.noisy, &once, &cfg).unwrap();
    assert!(max_diff(once.as_slice(), twice.as_slice()) <= 1e-6);
}

#[test]
fn huge_lambda_pins_states() {
    let fx = fixture("rossler", 3, 1.0, 2);
    let anchor = ProxAnchor::new(fx.noisy.clone(), 1e9).unwrap();
    let next = x_step(&fx.problem, &anchor, &fx.noisy, &fx.theta_true, &MinimizerConfig::default()).unwrap();
    assert!(max_diff(next.as_slice(), fx.noisy.as_slice()) <= 1e-3);
}

#[test]
fn zero_lambda_drives_fidelity_to_zero() {
    let fx = fixture("fitzhugh_nagumo", 3, 0.5, 4);
    let anchor = ProxAnchor::new(fx.noisy.clone(), 0.0).unwrap();
    let next = x_step(&fx.problem, &anchor, &fx.noisy, &fx.theta_true, &MinimizerConfig::default()).unwrap();
    let e = fx.problem.fidelity(&next, &fx.theta_true).unwrap();
    assert!(e <= 1e-10, "E = {e}");
    // The minimizer is the exact forward prediction from its first state.
    let x1 = StateVector::try_from(next.state(0)).unwrap();
    assert_eq!(next.as_slice(), fx.problem.forward_predict(&fx.theta_true, &x1).unwrap().as_slice());
}

#[test]
fn x_step_keeps_a_zero_of_the_fidelity() {
    let fx = fixture("rossler", 3, 0.0, 0);
    let x1 = StateVector::try_from(fx.clean.state(0)).unwrap();
    let xhat = fx.problem.forward_predict(&fx.theta_true, &x1).unwrap();
    let anchor = ProxAnchor::new(xhat.clone(), 1.0).unwrap();
    let next = x_step(&fx.problem, &anchor, &xhat, &fx.theta_true, &MinimizerConfig::default()).unwrap();
    assert_eq!(next.as_slice(), xhat.as_slice());
}

#[test]
fn block_step_only_moves_its_block() {
    let fx = fixture("fitzhugh_nagumo", 3, 0.5, 5);
    let anchor = ProxAnchor::new(fx.noisy.clone(), 1.0).unwrap();
    let half = fx.problem.len() / 2;
    let next = x_block_step(
        &fx.problem,
        &anchor,
        &fx.noisy,
        &fx.theta_true,
        half..fx.problem.len(),
        &MinimizerConfig::default(),
    )
    .unwrap();
    let d = fx.problem.dim();
    assert_eq!(next.as_slice()[..half * d], fx.noisy.as_slice()[..half * d]);
    assert_ne!(next.as_slice()[half * d..], fx.noisy.as_slice()[half * d..]);
    let before = fx.problem.prox_objective(&anchor, &fx.noisy, &fx.theta_true).unwrap();
    let after = fx.problem.prox_objective(&anchor, &next, &fx.theta_true).unwrap();
    assert!(after <= before);
}

fn assert_monotone(result: &EstimationResult) {
    let mut previous = result.trace.initial_fidelity;
    for (n, e) in result.trace.fidelities().into_iter().enumerate() {
        assert!(e <= previous + 1e-10, "iteration {n}: {e} > {previous}");
        previous = e;
    }
}

fn assert_zero_fidelity_output(problem: &FidelityProblem, result: &EstimationResult) {
    let xhat = result.predicted.as_ref().expect("prediction diverged");
    let e = problem.fidelity(xhat, &result.theta).unwrap();
    let norm2: f64 = xhat.as_slice().iter().map(|v| v * v).sum();
    assert!(e <= 1e-15 * (1.0 + norm2), "E(X̂) = {e}");
}

#[test]
fn two_block_run_is_monotone_and_returns_zero_fidelity_prediction() {
    let fx = fixture("fitzhugh_nagumo", 3, 0.5, 6);
    let cfg = SolverConfig { max_outer_iterations: 300, ..Default::default() };
    let res = bcd_prox(&fx.problem, &fx.noisy, &shifted(&fx.theta_true, 0.2), &cfg).unwrap();
    assert!(res.trace.iterations() <= 300);
    assert_monotone(&res);
    assert_zero_fidelity_output(&fx.problem, &res);
    assert_eq!(res.states.state(0).len(), 2);
}

#[test]
fn noise_free_data_recovers_theta() {
    // A fine Rössler grid keeps the AB3 discretization error small.
    let b = benchmark_registry("rossler", 0).unwrap();
    let grid = TimeGrid::uniform(0.0, 4.0, 0.01).unwrap();
    let clean = rk_integrate(b.model.as_ref(), &b.theta_true, &b.initial_state, &grid).unwrap();
    let problem = FidelityProblem::new(b.model.clone(), grid, 3).unwrap();
    // Run past the default |ΔE| rule so "at convergence" means E has bottomed out.
    let cfg = SolverConfig { outer_tolerance: 1e-16, ..Default::default() };
    let res = bcd_prox(&problem, &clean, &b.theta_true, &cfg).unwrap();
    let e = res.trace.fidelities().last().copied().unwrap();
    assert!(e <= 1e-12, "final E = {e}");
    assert!(max_diff(res.theta.as_slice(), b.theta_true.as_slice()) <= 1e-4, "{:?}", res.theta);
}

#[test]
fn zero_lambda_stops_after_one_iteration() {
    let cfg = SolverConfig { lambda: 0.0, ..Default::default() };
    for (name, seed) in [("rossler", 7), ("fitzhugh_nagumo", 1), ("fitzhugh_nagumo", 2), ("fitzhugh_nagumo", 3)] {
        let fx = fixture(name, 3, 0.5, seed);
        let res = bcd_prox(&fx.problem, &fx.noisy, &shifted(&fx.theta_true, 0.2), &cfg).unwrap();
        assert_eq!(res.trace.iterations(), 1, "{name} seed {seed}");
        assert_eq!(res.trace.termination, Termination::ZeroFidelity);
        assert_eq!(res.trace.fidelities()[0], 0.0);
    }
}

#[test]
fn split_schedule_matches_two_block_and_handles_odd_length() {
    let fx = fixture("lotka_volterra", 3, 0.5, 8);
    let theta0 = shifted(&fx.theta_true, 0.5);
    let cfg = SolverConfig::default();
    let two = bcd_prox(&fx.problem, &fx.noisy, &theta0, &cfg).unwrap();
    let split = bcd_prox_split(&fx.problem, &fx.noisy, &theta0, &cfg).unwrap();
    assert_monotone(&split);
    let (e2, es) = (two.trace.fidelities().pop().unwrap(), split.trace.fidelities().pop().unwrap());
    assert!(es <= 10.0 * e2 + 1e-12 && e2 <= 10.0 * es + 1e-12, "two-block {e2}, split {es}");

    let odd = fx.noisy.grid().prefix(19).unwrap();
    let y = TimeSeries::from_column_slice(odd.clone(), 2, &fx.noisy.as_slice()[..38]).unwrap();
    let problem = FidelityProblem::new(fx.problem.model_arc().clone(), odd, 3).unwrap();
    let res = bcd_prox_split(&problem, &y, &theta0, &cfg).unwrap();
    assert_monotone(&res);
}

#[test]
fn runs_are_bit_deterministic() {
    let fx = fixture("fitzhugh_nagumo", 3, 1.0, 9);
    let cfg = SolverConfig { max_outer_iterations: 50, ..Default::default() };
    let theta0 = shifted(&fx.theta_true, -0.4);
    let a = estimate(&fx.problem, &fx.noisy, &theta0, &cfg, Some(&fx.clean)).unwrap();
    let b = estimate(&fx.problem, &fx.noisy, &theta0, &cfg, Some(&fx.clean)).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.theta, b.theta);
    let bits = |s: &TimeSeries| s.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.states), bits(&b.states));
    assert!(a.trace.entries.iter().all(|e| e.prediction_error.is_some()));
}

#[test]
fn config_is_validated() {
    let fx = fixture("rossler", 3, 0.5, 0);
    let bad = [
        SolverConfig { lambda: -1.0, ..Default::default() },
        SolverConfig { outer_tolerance: 0.0, ..Default::default() },
        SolverConfig { max_outer_iterations: 0, ..Default::default() },
        SolverConfig { order: 1, ..Default::default() },
    ];
    for cfg in bad {
        assert!(bcd_prox(&fx.problem, &fx.noisy, &fx.theta_true, &cfg).is_err(), "{cfg:?}");
    }
    let model: Arc<dyn OdeModel> = fx.problem.model_arc().clone();
    let short = TimeGrid::uniform(0.0, 1.0, 0.05).unwrap();
    let other = FidelityProblem::new(model, short, 3).unwrap();
    assert!(bcd_prox(&other, &fx.noisy, &fx.theta_true, &SolverConfig::default()).is_err());
}
