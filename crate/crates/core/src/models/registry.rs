use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use super::{FitzHughNagumo, Lorenz96, LotkaVolterra, OdeModel, ParameterVector, Rossler, StateVector};
use crate::discretize::TimeGrid;
use crate::rng::{self, Purpose};
use crate::{Error, Result};

/// Names accepted by [`benchmark_registry`], as used in configs and on the CLI.
pub const BENCHMARK_NAMES: [&str; 4] = ["lotka_volterra", "fitzhugh_nagumo", "rossler", "lorenz96"];

/// A benchmark system with its ground truth and default sampling grid.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub model: Arc<dyn OdeModel>,
    pub theta_true: ParameterVector,
    pub initial_state: StateVector,
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl Benchmark {
    /// The default grid `t0, t0 + dt, …` on `[t0, t_end)`.
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.t0, self.t_end, self.dt)
    }
}

/// Looks up a benchmark by name. Every call builds a fresh value.
///
/// `seed` only matters for `lorenz96`, whose initial state is drawn from a
/// standard normal on the [`Purpose::InitialState`] stream of that seed.
pub fn benchmark_registry(name: &str, seed: u64) -> Result<Benchmark> {
    let fixed = |model: Arc<dyn OdeModel>, theta: Vec<f64>, x1: Vec<f64>, t_end: f64, dt: f64| {
        Ok(Benchmark {
            model,
            theta_true: ParameterVector::new(theta)?,
            initial_state: StateVector::new(x1)?,
            t0: 0.0,
            t_end,
            dt,
        })
    };
    match name {
        "lotka_volterra" => fixed(
            Arc::new(LotkaVolterra),
            vec![2.0, 1.0, 4.0, 1.0],
            vec![5.0, 3.0],
            2.0,
            0.1,
        ),
        "fitzhugh_nagumo" => fixed(
            Arc::new(FitzHughNagumo),
            vec![0.5, 0.2, 3.0],
            vec![-1.0, 1.0],
            20.0,
            0.05,
        ),
        "rossler" => fixed(
            Arc::new(Rossler),
            vec![0.2, 0.2, 3.0],
            vec![1.13, -1.74, 0.02],
            20.0,
            0.05,
        ),
        "lorenz96" => {
            let model = Lorenz96::new(40);
            let mut rng = rng::stream(seed, 0, Purpose::InitialState);
            let x1 = (0..model.state_dim())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            fixed(Arc::new(model), vec![8.0], x1, 4.0, 0.01)
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}
