use crate::discretize::TimeSeries;
use crate::models::ParameterVector;
use crate::{Error, Result};

fn same_shape(a: &TimeSeries, b: &TimeSeries) -> Result<()> {
    if a.dim() != b.dim() || a.len() != b.len() {
        return Err(Error::contract(format!(
            "series shapes differ: {}x{} vs {}x{}",
            a.dim(),
            a.len(),
            b.dim(),
            b.len()
        )));
    }
    Ok(())
}

/// Frobenius norm `‖X − X̂‖`.
///
/// Pass `None` for a prediction that diverged; the error is then `+∞`.
pub fn prediction_error(truth: &TimeSeries, predicted: Option<&TimeSeries>) -> Result<f64> {
    let Some(predicted) = predicted else { return Ok(f64::INFINITY) };
    same_shape(truth, predicted)?;
    let e = crate::solver::frobenius_distance(truth.as_slice(), predicted.as_slice());
    Ok(if e.is_finite() { e } else { f64::INFINITY })
}

/// Componentwise `|θ_l − θ*_l|`.
pub fn parameter_error(truth: &ParameterVector, estimate: &ParameterVector) -> Result<Vec<f64>> {
    if truth.len() != estimate.len() {
        return Err(Error::contract("parameter vectors differ in length"));
    }
    Ok(truth.as_slice().iter().zip(estimate.as_slice()).map(|(a, b)| (a - b).abs()).collect())
}

/// Mean over time of the Euclidean distance between true and estimated
/// states, `(1/T) Σᵢ ‖xᵢ − x*ᵢ‖₂`.
pub fn estimation_error(truth: &TimeSeries, estimate: &TimeSeries) -> Result<f64> {
    same_shape(truth, estimate)?;
    let d = truth.dim();
    let total: f64 = truth
        .as_slice()
        .chunks_exact(d)
        .zip(estimate.as_slice().chunks_exact(d))
        .map(|(a, b)| crate::solver::frobenius_distance(a, b))
        .sum();
    Ok(total / truth.len() as f64)
}
