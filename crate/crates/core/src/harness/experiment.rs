use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::baselines::{ekf_run, shooting_lsq, EkfConfig};
use crate::discretize::TimeSeries;
use crate::models::{benchmark_registry, ParameterVector};
use crate::objective::FidelityProblem;
use crate::solver::{estimate, MinimizerConfig, Schedule, SolverConfig, SolverTrace};
use crate::{Error, Result};

use super::config::{ExperimentConfig, Method};
use super::dataset::{generate_dataset, perturb_parameters, Dataset};
use super::io::{csv_writer, fmt_f64, write_dataset};
use super::metrics::{estimation_error, parameter_error, prediction_error};

/// Run settings that are not part of an experiment's identity.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// With `false` the `seconds` column is written as 0 so that reruns are
    /// byte-identical.
    pub record_timing: bool,
    pub max_outer_iterations: usize,
    pub outer_tolerance: f64,
    pub write_datasets: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        let solver = SolverConfig::default();
        Self {
            record_timing: true,
            max_outer_iterations: solver.max_outer_iterations,
            outer_tolerance: solver.outer_tolerance,
            write_datasets: true,
        }
    }
}

/// One method on one replicate.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub replicate: u64,
    pub method: Method,
    pub lambda: f64,
    pub order: usize,
    /// `+∞` when the predicted trajectory diverged or the method failed.
    pub pred_error: f64,
    pub est_error: f64,
    pub param_errors: Vec<f64>,
    pub theta: Vec<f64>,
    pub iters: usize,
    pub seconds: f64,
    pub status: String,
    /// The method raised a numerical error or produced no finite prediction.
    pub failed: bool,
    /// SHA-256 of the observations and starting parameters the method saw.
    pub inputs_digest: String,
    pub trace: Option<SolverTrace>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub rows: Vec<RunRow>,
    pub datasets: Vec<Dataset>,
}

impl RunResult {
    /// True when every row failed, the CLI's exit-code-2 condition.
    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| r.failed)
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &RunRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Mean of `f` over `method`'s rows; `+∞` propagates.
    pub fn mean(&self, method: Method, f: impl Fn(&RunRow) -> f64) -> f64 {
        let v: Vec<f64> = self.rows_for(method).map(f).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Writes `results.csv`, a trace per solver run and (optionally) the
    /// datasets under `dir`.
    pub fn write(&self, dir: &Path, options: &RunOptions) -> Result<()> {
        write_results(&dir.join("results.csv"), &self.rows, None)?;
        for row in &self.rows {
            if let Some(trace) = &row.trace {
                let path = dir.join("traces").join(format!("replicate_{}_{}.csv", row.replicate, row.method));
                write_trace(&path, trace)?;
            }
        }
        if options.write_datasets {
            for ds in &self.datasets {
                write_dataset(&dir.join("data"), &format!("replicate_{}", ds.replicate), ds)?;
            }
        }
        Ok(())
    }
}

fn digest(y: &TimeSeries, theta0: &ParameterVector) -> String {
    let mut h = Sha256::new();
    for v in y.as_slice().iter().chain(theta0.as_slice()) {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Generates one dataset per replicate.
pub fn generate_datasets(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    config.validate()?;
    (0..config.replicates)
        .into_par_iter()
        .map(|r| generate_dataset(&config.model, Some(config.grid()), config.theta_true.as_deref(), &config.noise, r))
        .collect()
}

/// Runs every listed method on every replicate.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RunResult> {
    let datasets = generate_datasets(config)?;
    run_on_datasets(config, datasets, options)
}

/// Like [`run_experiment`] but on datasets generated beforehand, so that
/// several settings can share the same observations.
pub fn run_on_datasets(config: &ExperimentConfig, datasets: Vec<Dataset>, options: &RunOptions) -> Result<RunResult> {
    config.validate()?;
    let per_replicate: Vec<Result<Vec<RunRow>>> = datasets
        .par_iter()
        .map(|ds| {
            let theta0 = perturb_parameters(&ds.theta_true, config.theta_init.sigma2, config.theta_init.seed, ds.replicate)?;
            Ok(config.methods.iter().map(|&m| run_method(config, options, ds, &theta0, m)).collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_replicate {
        rows.extend(r?);
    }
    Ok(RunResult { config: config.clone(), rows, datasets })
}

fn run_method(config: &ExperimentConfig, options: &RunOptions, ds: &Dataset, theta0: &ParameterVector, method: Method) -> RunRow {
    let p = ds.theta_true.len();
    let mut row = RunRow {
        replicate: ds.replicate,
        method,
        lambda: config.lambda,
        order: config.order,
        pred_error: f64::INFINITY,
        est_error: f64::INFINITY,
        param_errors: vec![f64::INFINITY; p],
        theta: vec![f64::NAN; p],
        iters: 0,
        seconds: 0.0,
        status: String::new(),
        failed: true,
        inputs_digest: digest(&ds.observed, theta0),
        trace: None,
    };
    let start = Instant::now();
    let outcome = fit(config, options, ds, theta0, method, &mut row);
    if options.record_timing {
        row.seconds = start.elapsed().as_secs_f64();
    }
    match outcome {
        Ok(()) => row.failed = !row.pred_error.is_finite() && !row.est_error.is_finite(),
        Err(e) => row.status = if e.is_numerical() { format!("failed: {e}") } else { format!("error: {e}") },
    }
    row
}

fn fit(
    config: &ExperimentConfig,
    options: &RunOptions,
    ds: &Dataset,
    theta0: &ParameterVector,
    method: Method,
    row: &mut RunRow,
) -> Result<()> {
    let model = benchmark_registry(&config.model, config.noise.seed)?.model;
    let (theta, estimated, predicted) = match method {
        Method::Bcdprox | Method::BcdproxSplit => {
            let problem = FidelityProblem::new(model, ds.grid.clone(), config.order)?;
            let solver = SolverConfig {
                lambda: config.lambda,
                order: config.order,
                outer_tolerance: options.outer_tolerance,
                max_outer_iterations: options.max_outer_iterations,
                schedule: if method == Method::Bcdprox { Schedule::TwoBlock } else { Schedule::Split },
                inner: MinimizerConfig::default(),
            };
            let res = estimate(&problem, &ds.observed, theta0, &solver, Some(&ds.clean))?;
            row.iters = res.trace.iterations();
            row.status = match res.diverged_at {
                Some(i) => format!("diverged_at_{i}"),
                None => res.trace.termination.as_str().to_string(),
            };
            row.trace = Some(res.trace);
            (res.theta, Some(res.states), res.predicted)
        }
        Method::Ekf => {
            let res = ekf_run(model.as_ref(), &ds.observed, theta0, &EkfConfig::default())?;
            row.iters = res.steps.len();
            row.status = "completed".into();
            (res.theta, Some(res.states), None)
        }
        Method::Lsq => {
            let res = shooting_lsq(model.as_ref(), &ds.observed, theta0, config.order, &MinimizerConfig::default())?;
            row.status = match res.status {
                Some(s) => format!("{s:?}").to_lowercase(),
                None => "failed_start".into(),
            };
            // The shooting fit has no separate state estimate.
            (res.theta, res.predicted.clone(), res.predicted)
        }
    };
    row.theta = theta.to_vec();
    row.param_errors = parameter_error(&ds.theta_true, &theta)?;
    if method != Method::Ekf {
        row.pred_error = prediction_error(&ds.clean, predicted.as_ref())?;
    }
    if let Some(x) = &estimated {
        let e = estimation_error(&ds.clean, x)?;
        row.est_error = if e.is_finite() { e } else { f64::INFINITY };
    }
    Ok(())
}

fn write_results(path: &Path, rows: &[RunRow], sweep: Option<(&str, &[f64])>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let p = rows.first().map_or(0, |r| r.param_errors.len());
    let mut header: Vec<String> = Vec::new();
    if let Some((axis, _)) = sweep {
        header.push(axis.to_string());
    }
    header.extend(["replicate", "method", "lambda", "order", "pred_error", "est_error"].map(String::from));
    header.extend((0..p).map(|l| format!("param_err_{l}")));
    if sweep.is_some() {
        header.extend((0..p).map(|l| format!("theta_{l}")));
    }
    header.extend(["iters", "seconds", "status"].map(String::from));
    w.write_record(&header)?;
    for (k, r) in rows.iter().enumerate() {
        let mut rec = Vec::new();
        if let Some((_, values)) = sweep {
            rec.push(fmt_f64(values[k]));
        }
        rec.extend([
            r.replicate.to_string(),
            r.method.to_string(),
            fmt_f64(r.lambda),
            r.order.to_string(),
            fmt_f64(r.pred_error),
            fmt_f64(r.est_error),
        ]);
        rec.extend(r.param_errors.iter().map(|&v| fmt_f64(v)));
        if sweep.is_some() {
            rec.extend(r.theta.iter().map(|&v| fmt_f64(v)));
        }
        rec.extend([r.iters.to_string(), fmt_f64(r.seconds), r.status.clone()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `iter,E,theta_0,…,pred_error`; iteration 0 is the starting point.
pub fn write_trace(path: &Path, trace: &SolverTrace) -> Result<()> {
    let mut w = csv_writer(path)?;
    let p = trace.entries.first().map_or(0, |e| e.theta.len());
    let mut header = vec!["iter".to_string(), "E".to_string()];
    header.extend((0..p).map(|l| format!("theta_{l}")));
    header.push("pred_error".into());
    w.write_record(&header)?;
    for (n, e) in trace.entries.iter().enumerate() {
        let mut rec = vec![(n + 1).to_string(), fmt_f64(e.fidelity)];
        rec.extend(e.theta.iter().map(|&v| fmt_f64(v)));
        rec.push(e.prediction_error.map_or(String::new(), fmt_f64));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Axis along which [`sweep`] varies the base config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Lambda,
    NoiseVariance,
    ThetaSigma2,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::NoiseVariance => "noise_variance",
            SweepAxis::ThetaSigma2 => "theta_sigma2",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<(f64, RunResult)>,
}

impl SweepResult {
    /// Writes one table with a leading column for the swept value and the
    /// recovered parameters next to their errors.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let mut values = Vec::new();
        let mut rows = Vec::new();
        for (v, res) in &self.points {
            values.extend(std::iter::repeat_n(*v, res.rows.len()));
            rows.extend(res.rows.iter().cloned());
        }
        let path = dir.join(format!("sweep_{}.csv", self.axis.as_str()));
        write_results(&path, &rows, Some((self.axis.as_str(), &values)))?;
        Ok(path)
    }

    pub fn all_failed(&self) -> bool {
        self.points.iter().all(|(_, r)| r.all_failed())
    }
}

/// Runs `base` once per value on `axis`. Settings that leave the
/// observations unchanged (λ, σ_θ²) reuse one set of datasets.
pub fn sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[f64], options: &RunOptions) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let shared = match axis {
        SweepAxis::NoiseVariance => None,
        _ => Some(generate_datasets(base)?),
    };
    let mut points = Vec::with_capacity(values.len());
    for &v in values {
        let mut config = base.clone();
        match axis {
            SweepAxis::Lambda => config.lambda = v,
            SweepAxis::NoiseVariance => config.noise.variance = v,
            SweepAxis::ThetaSigma2 => config.theta_init.sigma2 = v,
        }
        let result = match &shared {
            Some(ds) => run_on_datasets(&config, ds.clone(), options)?,
            None => run_experiment(&config, options)?,
        };
        points.push((v, result));
    }
    Ok(SweepResult { axis, points })
}

/// Convenience wrapper for [`sweep`] along λ.
pub fn sweep_lambda(base: &ExperimentConfig, lambdas: &[f64], options: &RunOptions) -> Result<SweepResult> {
    sweep(base, SweepAxis::Lambda, lambdas, options)
}

/// Per-method means, written by the `compare` command.
pub fn write_summary(path: &Path, result: &RunResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    let p = result.rows.first().map_or(0, |r| r.param_errors.len());
    let mut header = vec!["method".to_string(), "mean_pred_error".into(), "mean_est_error".into()];
    header.extend((0..p).map(|l| format!("mean_param_err_{l}")));
    header.push("failures".into());
    w.write_record(&header)?;
    for &m in &result.config.methods {
        let mut rec = vec![
            m.to_string(),
            fmt_f64(result.mean(m, |r| r.pred_error)),
            fmt_f64(result.mean(m, |r| r.est_error)),
        ];
        rec.extend((0..p).map(|l| fmt_f64(result.mean(m, |r| r.param_errors[l]))));
        rec.push(result.rows_for(m).filter(|r| r.failed).count().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
