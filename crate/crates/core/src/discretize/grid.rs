use nalgebra::DMatrix;

use crate::{Error, Result};

/// Strictly increasing sample times `t_1 < … < t_T` and their gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    gaps: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::contract("time grid needs at least one point"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::NumericDomain("time grid contains a non-finite time".into()));
        }
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(i) = gaps.iter().position(|&g| g <= 0.0) {
            return Err(Error::contract(format!(
                "times must be strictly increasing (t[{}] = {}, t[{}] = {})",
                i,
                times[i],
                i + 1,
                times[i + 1]
            )));
        }
        Ok(Self { times, gaps })
    }

    /// `t0, t0 + dt, …` covering the half-open interval `[t0, t_end)`.
    ///
    /// A span that is an integer multiple of `dt` up to rounding yields
    /// exactly `(t_end − t0) / dt` points, so `[0, 2)` at 0.1 has 20.
    pub fn uniform(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::contract(format!("grid step must be positive, got {dt}")));
        }
        if !(t_end > t0) {
            return Err(Error::contract(format!("empty time span [{t0}, {t_end})")));
        }
        let ratio = (t_end - t0) / dt;
        let nearest = ratio.round();
        let count = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        } as usize;
        Self::new((0..count).map(|i| t0 + i as f64 * dt).collect())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `Δᵢ = t_{i+1} − tᵢ`, length `T − 1`.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// True when all gaps agree with the first to a relative `1e-9`.
    pub fn is_uniform(&self) -> bool {
        match self.gaps.first() {
            None => true,
            Some(&g0) => self.gaps.iter().all(|g| (g - g0).abs() <= 1e-9 * g0),
        }
    }

    /// Returns a grid with the first `len` times.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return Err(Error::contract(format!("prefix length {len} out of range 1..={}", self.len())));
        }
        Ok(Self { times: self.times[..len].to_vec(), gaps: self.gaps[..len - 1].to_vec() })
    }
}

/// `T` states in ℝᵈ on a time grid, stored as a d×T matrix whose column
/// `i` is the state at `tᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    grid: TimeGrid,
    values: DMatrix<f64>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::contract(format!(
                "series has {} states but the grid has {} times",
                values.ncols(),
                grid.len()
            )));
        }
        if values.nrows() == 0 {
            return Err(Error::contract("series states must have dimension >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("time series contains a non-finite entry".into()));
        }
        Ok(Self { grid, values })
    }

    /// Builds a series from the column-major slice layout used by the solvers.
    pub fn from_column_slice(grid: TimeGrid, dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * grid.len() {
            return Err(Error::contract(format!(
                "expected {} values for {} states of dimension {}, got {}",
                dim * grid.len(),
                grid.len(),
                dim,
                data.len()
            )));
        }
        let cols = grid.len();
        Self::new(grid, DMatrix::from_column_slice(dim, cols, data))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// State dimension `d`.
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of states `T`.
    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    /// The state at grid index `i`.
    pub fn state(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.values.as_slice()[i * d..(i + 1) * d]
    }

    /// All states, column-major (state after state).
    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}
