use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::StreamRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Laplacian,
}

/// Additive i.i.d. observation noise with zero mean and variance σ².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub variance: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance >= 0.0) || !self.variance.is_finite() {
            return Err(Error::Config(format!("noise variance must be finite and ≥ 0, got {}", self.variance)));
        }
        Ok(())
    }

    /// Laplace scale `b` with `2b² = σ²`.
    pub fn laplace_scale(&self) -> f64 {
        (self.variance / 2.0).sqrt()
    }

    pub(crate) fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => self.variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
            NoiseKind::Laplacian => {
                // Inverse CDF on an open interval, so the log never sees 0.
                let u = rng.sample::<f64, _>(Open01) - 0.5;
                -self.laplace_scale() * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }
}
