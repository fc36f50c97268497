use nalgebra::{DMatrix, DVector};

use crate::discretize::TimeSeries;
use crate::models::{OdeModel, ParameterVector};
use crate::{Error, Result};

/// Noise levels of the joint-state filter. All diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct EkfConfig {
    pub initial_covariance: f64,
    pub measurement_variance: f64,
    /// Process noise on the state block.
    pub process_variance: f64,
    /// Process noise on the parameter block; keeps its covariance from
    /// collapsing.
    pub parameter_jitter: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            initial_covariance: 1000.0,
            measurement_variance: 0.1,
            process_variance: 1.0,
            parameter_jitter: 1e-8,
        }
    }
}

impl EkfConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.initial_covariance,
            self.measurement_variance,
            self.process_variance,
            self.parameter_jitter,
        ];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("EKF variances must be finite and positive".into()));
        }
        Ok(())
    }
}

/// Posterior `ξ = (x, θ)` and its covariance after one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct EkfResult {
    /// One entry per observation.
    pub steps: Vec<JointState>,
    pub theta: ParameterVector,
    /// Filtered states, the state block of each posterior mean.
    pub states: TimeSeries,
}

/// Runs the filter over `y`, starting from `ξ = (y₁, θ₀)`.
///
/// The process model is one Euler step with θ held constant, linearized
/// around the current estimate. Each posterior covariance is symmetrized
/// and its negative eigenvalues are clipped to zero.
pub fn ekf_run(
    model: &dyn OdeModel,
    y: &TimeSeries,
    theta0: &ParameterVector,
    config: &EkfConfig,
) -> Result<EkfResult> {
    config.validate()?;
    let (d, p) = (model.state_dim(), model.param_dim());
    if y.dim() != d || theta0.len() != p {
        return Err(Error::contract("observation or parameter dimension does not match the model"));
    }
    let n = d + p;
    let mut mean = DVector::zeros(n);
    mean.rows_mut(0, d).copy_from_slice(y.state(0));
    mean.rows_mut(d, p).copy_from_slice(theta0.as_slice());
    let mut cov = DMatrix::identity(n, n) * config.initial_covariance;
    let mut q = DMatrix::zeros(n, n);
    for k in 0..n {
        q[(k, k)] = if k < d { config.process_variance } else { config.parameter_jitter };
    }

    let mut jx = DMatrix::zeros(d, d);
    let mut jt = DMatrix::zeros(d, p);
    let mut field = vec![0.0; d];
    let mut transition = DMatrix::identity(n, n);
    let mut steps = Vec::with_capacity(y.len());
    let mut filtered = Vec::with_capacity(d * y.len());

    for i in 0..y.len() {
        if i > 0 {
            let dt = y.grid().gaps()[i - 1];
            let (x, theta) = (mean.rows(0, d).clone_owned(), mean.rows(d, p).clone_owned());
            model.field(x.as_slice(), theta.as_slice(), &mut field);
            model.state_jacobian(x.as_slice(), theta.as_slice(), &mut jx);
            model.param_jacobian(x.as_slice(), theta.as_slice(), &mut jt);
            for k in 0..d {
                mean[k] += dt * field[k];
            }
            transition.fill_with_identity();
            let mut block = transition.view_mut((0, 0), (d, d));
            block += &jx * dt;
            transition.view_mut((0, d), (d, p)).copy_from(&(&jt * dt));
            cov = &transition * &cov * transition.transpose() + &q;
        }

        // Update with H = [I 0] in Joseph form.
        let innovation = DVector::from_column_slice(y.state(i)) - mean.rows(0, d);
        let mut s = cov.view((0, 0), (d, d)).clone_owned();
        for k in 0..d {
            s[(k, k)] += config.measurement_variance;
        }
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Conditioning(format!("innovation covariance is singular at step {i}")))?;
        let gain = cov.columns(0, d) * s_inv;
        mean += &gain * innovation;
        let mut i_kh = DMatrix::identity(n, n);
        let mut block = i_kh.columns_mut(0, d);
        block -= &gain;
        cov = &i_kh * &cov * i_kh.transpose() + &gain * gain.transpose() * config.measurement_variance;
        cov = clip_to_psd(cov, i)?;

        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { index: i });
        }
        filtered.extend_from_slice(&mean.as_slice()[..d]);
        steps.push(JointState { mean: mean.clone(), covariance: cov.clone() });
    }

    let theta = ParameterVector::new(mean.as_slice()[d..].to_vec())?;
    let states = TimeSeries::from_column_slice(y.grid().clone(), d, &filtered)?;
    Ok(EkfResult { steps, theta, states })
}

/// Symmetrizes `cov` and clips negative eigenvalues. Fails if the clipped
/// mass exceeds `1e−6` of the trace.
fn clip_to_psd(cov: DMatrix<f64>, step: usize) -> Result<DMatrix<f64>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Conditioning(format!("covariance is not finite at step {step}")));
    }
    let sym = (&cov + cov.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let clipped: f64 = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    if clipped == 0.0 {
        return Ok(sym);
    }
    let trace = sym.trace();
    if clipped > 1e-6 * trace.abs() {
        return Err(Error::Conditioning(format!(
            "covariance lost positive semidefiniteness at step {step} (clipped {clipped:e} of trace {trace:e})"
        )));
    }
    let values = eig.eigenvalues.map(|l| l.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&values) * eig.eigenvectors.transpose();
    Ok((&rebuilt + rebuilt.transpose()) * 0.5)
}
