use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::discretize::{rk_integrate, TimeGrid, TimeSeries};
use crate::models::{benchmark_registry, ParameterVector};
use crate::rng::{self, Purpose};
use crate::{Error, Result};

use super::noise::NoiseSpec;

/// A uniform sampling grid on `[t0, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
}

/// Clean states, their noisy observations and the realized noise.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub model: String,
    pub replicate: u64,
    pub grid: TimeGrid,
    pub clean: TimeSeries,
    pub observed: TimeSeries,
    /// `Z = Y − X`, stored as drawn so that `Y = X + Z` holds exactly.
    pub noise: TimeSeries,
    pub theta_true: ParameterVector,
    pub noise_spec: NoiseSpec,
}

/// Integrates the benchmark `model` and adds noise drawn from the
/// replicate's own stream of `noise.seed`.
///
/// `grid` and `theta_true` default to the benchmark's settings.
pub fn generate_dataset(
    model: &str,
    grid: Option<GridSpec>,
    theta_true: Option<&[f64]>,
    noise: &NoiseSpec,
    replicate: u64,
) -> Result<Dataset> {
    noise.validate()?;
    let bench = benchmark_registry(model, noise.seed)?;
    let grid = match grid {
        Some(g) => TimeGrid::uniform(g.t0, g.t_end, g.dt)?,
        None => bench.grid()?,
    };
    let theta_true = match theta_true {
        Some(t) if t.len() != bench.model.param_dim() => {
            return Err(Error::Config(format!(
                "theta_true has {} entries, `{model}` has {} parameters",
                t.len(),
                bench.model.param_dim()
            )))
        }
        Some(t) => ParameterVector::new(t.to_vec())?,
        None => bench.theta_true.clone(),
    };
    let clean = rk_integrate(bench.model.as_ref(), &theta_true, &bench.initial_state, &grid)?;

    let mut rng = rng::stream(noise.seed, replicate, Purpose::ObservationNoise);
    let z: Vec<f64> = clean.as_slice().iter().map(|_| noise.sample(&mut rng)).collect();
    let y: Vec<f64> = clean.as_slice().iter().zip(&z).map(|(x, z)| x + z).collect();
    let d = clean.dim();
    Ok(Dataset {
        model: model.to_string(),
        replicate,
        observed: TimeSeries::from_column_slice(grid.clone(), d, &y)?,
        noise: TimeSeries::from_column_slice(grid.clone(), d, &z)?,
        grid,
        clean,
        theta_true,
        noise_spec: noise.clone(),
    })
}

/// `θ₀ = θ + N(0, σ² I)` on the replicate's parameter-init stream.
pub fn perturb_parameters(theta: &ParameterVector, sigma2: f64, seed: u64, replicate: u64) -> Result<ParameterVector> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::Config(format!("θ perturbation variance must be finite and ≥ 0, got {sigma2}")));
    }
    let mut rng = rng::stream(seed, replicate, Purpose::ParameterInit);
    let sd = sigma2.sqrt();
    ParameterVector::new(
        theta
            .as_slice()
            .iter()
            .map(|t| {
                let z: f64 = StandardNormal.sample(&mut rng);
                t + sd * z
            })
            .collect(),
    )
}
