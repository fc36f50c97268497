use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretize::MAX_ORDER;
use crate::models::benchmark_registry;
use crate::{Error, Result};

use super::dataset::GridSpec;
use super::noise::NoiseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bcdprox,
    BcdproxSplit,
    Ekf,
    Lsq,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bcdprox, Method::BcdproxSplit, Method::Ekf, Method::Lsq];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Bcdprox => "bcdprox",
            Method::BcdproxSplit => "bcdprox_split",
            Method::Ekf => "ekf",
            Method::Lsq => "lsq",
        }
    }

    pub fn parse(name: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == name)
            .ok_or_else(|| Error::Config(format!("unknown method `{name}`")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Spread and seed of the Gaussian perturbation applied to the true
/// parameters to get each replicate's starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaInit {
    pub sigma2: f64,
    pub seed: u64,
}

/// One experiment as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: String,
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub noise: NoiseSpec,
    pub lambda: f64,
    pub order: usize,
    pub theta_init: ThetaInit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_true: Option<Vec<f64>>,
    pub replicates: u64,
    pub methods: Vec<Method>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { t0: self.t0, t_end: self.t_end, dt: self.dt }
    }

    pub fn validate(&self) -> Result<()> {
        let bench = benchmark_registry(&self.model, self.noise.seed)
            .map_err(|_| Error::Config(format!("unknown model `{}`", self.model)))?;
        if !(self.t0.is_finite() && self.t_end.is_finite() && self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config("t0, t_end and dt must be finite with dt > 0".into()));
        }
        if self.t_end - self.t0 < 2.0 * self.dt {
            return Err(Error::Config("the grid needs at least two points".into()));
        }
        self.noise.validate()?;
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be finite and ≥ 0, got {}", self.lambda)));
        }
        if !(1..=MAX_ORDER).contains(&self.order) {
            return Err(Error::Config(format!("order must be in 1..={MAX_ORDER}, got {}", self.order)));
        }
        if !(self.theta_init.sigma2 >= 0.0) || !self.theta_init.sigma2.is_finite() {
            return Err(Error::Config("theta_init.sigma2 must be finite and ≥ 0".into()));
        }
        if let Some(t) = &self.theta_true {
            if t.len() != bench.model.param_dim() || t.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "theta_true must hold {} finite values",
                    bench.model.param_dim()
                )));
            }
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        Ok(())
    }
}
