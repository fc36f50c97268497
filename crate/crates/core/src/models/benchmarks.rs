use nalgebra::DMatrix;

use super::{LinearInParams, OdeModel};

/// Predator–prey dynamics.
///
/// ```text
/// dx0/dt = θ0 x0 − θ1 x0 x1
/// dx1/dt = θ2 x0 x1 − θ3 x1
/// ```
#[derive(Debug, Clone, Copy, Default)]
pub struct LotkaVolterra;

impl OdeModel for LotkaVolterra {
    fn name(&self) -> &str {
        "lotka_volterra"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        4
    }

    fn field(&self, x: &[f64], th: &[f64], out: &mut [f64]) {
        let xy = x[0] * x[1];
        out[0] = th[0] * x[0] - th[1] * xy;
        out[1] = th[2] * xy - th[3] * x[1];
    }

    fn state_jacobian(&self, x: &[f64], th: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = th[0] - th[1] * x[1];
        out[(0, 1)] = -th[1] * x[0];
        out[(1, 0)] = th[2] * x[1];
        out[(1, 1)] = th[2] * x[0] - th[3];
    }

    fn param_jacobian(&self, x: &[f64], _th: &[f64], out: &mut DMatrix<f64>) {
        self.coupling(x, out);
    }

    fn state_vjp(&self, x: &[f64], th: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] += (th[0] - th[1] * x[1]) * v[0] + th[2] * x[1] * v[1];
        out[1] += -th[1] * x[0] * v[0] + (th[2] * x[0] - th[3]) * v[1];
    }

    fn param_vjp(&self, x: &[f64], _th: &[f64], v: &[f64], out: &mut [f64]) {
        let xy = x[0] * x[1];
        out[0] += x[0] * v[0];
        out[1] -= xy * v[0];
        out[2] += xy * v[1];
        out[3] -= x[1] * v[1];
    }

    fn linear_form(&self) -> Option<&dyn LinearInParams> {
        Some(self)
    }
}

impl LinearInParams for LotkaVolterra {
    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn coupling(&self, x: &[f64], out: &mut DMatrix<f64>) {
        let xy = x[0] * x[1];
        out.fill(0.0);
        out[(0, 0)] = x[0];
        out[(0, 1)] = -xy;
        out[(1, 2)] = xy;
        out[(1, 3)] = -x[1];
    }
}

/// Spike generation model in its original parameterization.
///
/// ```text
/// dx0/dt = θ2 (x0 − x0³/3 + x1)
/// dx1/dt = −(x0 − θ0 + θ1 x1) / θ2
/// ```
///
/// The field is not affine in θ2. [`FitzHughNagumo::linear_reparameterization`]
/// gives the equivalent system in the free coefficients
/// `c = (θ2, 1/θ2, θ0/θ2, θ1/θ2)`, which is.
#[derive(Debug, Clone, Copy, Default)]
pub struct FitzHughNagumo;

impl FitzHughNagumo {
    pub fn linear_reparameterization(&self) -> FitzHughNagumoLinear {
        FitzHughNagumoLinear
    }

    /// Maps `(θ0, θ1, θ2)` to the coefficients of [`FitzHughNagumoLinear`].
    pub fn linear_coefficients(theta: &[f64]) -> [f64; 4] {
        [theta[2], 1.0 / theta[2], theta[0] / theta[2], theta[1] / theta[2]]
    }
}

impl OdeModel for FitzHughNagumo {
    fn name(&self) -> &str {
        "fitzhugh_nagumo"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        3
    }

    fn field(&self, x: &[f64], th: &[f64], out: &mut [f64]) {
        out[0] = th[2] * (x[0] - x[0] * x[0] * x[0] / 3.0 + x[1]);
        out[1] = -(x[0] - th[0] + th[1] * x[1]) / th[2];
    }

    fn state_jacobian(&self, x: &[f64], th: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = th[2] * (1.0 - x[0] * x[0]);
        out[(0, 1)] = th[2];
        out[(1, 0)] = -1.0 / th[2];
        out[(1, 1)] = -th[1] / th[2];
    }

    fn param_jacobian(&self, x: &[f64], th: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(0, 2)] = x[0] - x[0] * x[0] * x[0] / 3.0 + x[1];
        out[(1, 0)] = 1.0 / th[2];
        out[(1, 1)] = -x[1] / th[2];
        out[(1, 2)] = (x[0] - th[0] + th[1] * x[1]) / (th[2] * th[2]);
    }

    fn state_vjp(&self, x: &[f64], th: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] += th[2] * (1.0 - x[0] * x[0]) * v[0] - v[1] / th[2];
        out[1] += th[2] * v[0] - th[1] / th[2] * v[1];
    }

    fn param_vjp(&self, x: &[f64], th: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] += v[1] / th[2];
        out[1] -= x[1] / th[2] * v[1];
        out[2] += (x[0] - x[0] * x[0] * x[0] / 3.0 + x[1]) * v[0]
            + (x[0] - th[0] + th[1] * x[1]) / (th[2] * th[2]) * v[1];
    }
}

/// [`FitzHughNagumo`] with its four coefficients treated as free:
///
/// ```text
/// dx0/dt = c0 (x0 − x0³/3 + x1)
/// dx1/dt = −c1 x0 + c2 − c3 x1
/// ```
#[derive(Debug, Clone, Copy, Default)]
pub struct FitzHughNagumoLinear;

impl OdeModel for FitzHughNagumoLinear {
    fn name(&self) -> &str {
        "fitzhugh_nagumo_linear"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        4
    }

    fn field(&self, x: &[f64], c: &[f64], out: &mut [f64]) {
        out[0] = c[0] * (x[0] - x[0] * x[0] * x[0] / 3.0 + x[1]);
        out[1] = -c[1] * x[0] + c[2] - c[3] * x[1];
    }

    fn state_jacobian(&self, x: &[f64], c: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = c[0] * (1.0 - x[0] * x[0]);
        out[(0, 1)] = c[0];
        out[(1, 0)] = -c[1];
        out[(1, 1)] = -c[3];
    }

    fn param_jacobian(&self, x: &[f64], _c: &[f64], out: &mut DMatrix<f64>) {
        self.coupling(x, out);
    }

    fn linear_form(&self) -> Option<&dyn LinearInParams> {
        Some(self)
    }
}

impl LinearInParams for FitzHughNagumoLinear {
    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn coupling(&self, x: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(0, 0)] = x[0] - x[0] * x[0] * x[0] / 3.0 + x[1];
        out[(1, 1)] = -x[0];
        out[(1, 2)] = 1.0;
        out[(1, 3)] = -x[1];
    }
}

/// Rössler system.
///
/// ```text
/// dx0/dt = −x1 − x2
/// dx1/dt = x0 + θ0 x1
/// dx2/dt = θ1 + x2 (x0 − θ2)
/// ```
#[derive(Debug, Clone, Copy, Default)]
pub struct Rossler;

impl OdeModel for Rossler {
    fn name(&self) -> &str {
        "rossler"
    }

    fn state_dim(&self) -> usize {
        3
    }

    fn param_dim(&self) -> usize {
        3
    }

    fn field(&self, x: &[f64], th: &[f64], out: &mut [f64]) {
        out[0] = -x[1] - x[2];
        out[1] = x[0] + th[0] * x[1];
        out[2] = th[1] + x[2] * (x[0] - th[2]);
    }

    fn state_jacobian(&self, x: &[f64], th: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(0, 1)] = -1.0;
        out[(0, 2)] = -1.0;
        out[(1, 0)] = 1.0;
        out[(1, 1)] = th[0];
        out[(2, 0)] = x[2];
        out[(2, 2)] = x[0] - th[2];
    }

    fn param_jacobian(&self, x: &[f64], _th: &[f64], out: &mut DMatrix<f64>) {
        self.coupling(x, out);
    }

    fn state_vjp(&self, x: &[f64], th: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] += v[1] + x[2] * v[2];
        out[1] += -v[0] + th[0] * v[1];
        out[2] += -v[0] + (x[0] - th[2]) * v[2];
    }

    fn param_vjp(&self, x: &[f64], _th: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] += x[1] * v[1];
        out[1] += v[2];
        out[2] -= x[2] * v[2];
    }

    fn linear_form(&self) -> Option<&dyn LinearInParams> {
        Some(self)
    }
}

impl LinearInParams for Rossler {
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -x[1] - x[2];
        out[1] = x[0];
        out[2] = x[2] * x[0];
    }

    fn coupling(&self, x: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(1, 0)] = x[1];
        out[(2, 1)] = 1.0;
        out[(2, 2)] = -x[2];
    }
}

/// Lorenz-96 with `d` cyclically coupled states and forcing θ0:
///
/// ```text
/// dx_k/dt = (x_{k+1} − x_{k−2}) x_{k−1} − x_k + θ0,   indices mod d
/// ```
#[derive(Debug, Clone, Copy)]
pub struct Lorenz96 {
    dim: usize,
}

impl Lorenz96 {
    /// # Panics
    /// If `dim < 4`; smaller rings alias the neighbour indices.
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 4, "Lorenz-96 needs at least 4 states, got {dim}");
        Self { dim }
    }

    #[inline]
    fn neighbours(&self, k: usize) -> (usize, usize, usize) {
        let d = self.dim;
        ((k + 1) % d, (k + d - 1) % d, (k + d - 2) % d)
    }
}

impl Default for Lorenz96 {
    fn default() -> Self {
        Self::new(40)
    }
}

impl OdeModel for Lorenz96 {
    fn name(&self) -> &str {
        "lorenz96"
    }

    fn state_dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn field(&self, x: &[f64], th: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let (next, prev, prev2) = self.neighbours(k);
            *o = (x[next] - x[prev2]) * x[prev] - x[k] + th[0];
        }
    }

    fn state_jacobian(&self, x: &[f64], _th: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for k in 0..self.dim {
            let (next, prev, prev2) = self.neighbours(k);
            out[(k, next)] += x[prev];
            out[(k, prev2)] -= x[prev];
            out[(k, prev)] += x[next] - x[prev2];
            out[(k, k)] -= 1.0;
        }
    }

    fn param_jacobian(&self, x: &[f64], _th: &[f64], out: &mut DMatrix<f64>) {
        self.coupling(x, out);
    }

    fn state_vjp(&self, x: &[f64], _th: &[f64], v: &[f64], out: &mut [f64]) {
        for k in 0..self.dim {
            let (next, prev, prev2) = self.neighbours(k);
            let vk = v[k];
            out[next] += x[prev] * vk;
            out[prev2] -= x[prev] * vk;
            out[prev] += (x[next] - x[prev2]) * vk;
            out[k] -= vk;
        }
    }

    fn param_vjp(&self, _x: &[f64], _th: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] += v.iter().sum::<f64>();
    }

    fn linear_form(&self) -> Option<&dyn LinearInParams> {
        Some(self)
    }
}

impl LinearInParams for Lorenz96 {
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let (next, prev, prev2) = self.neighbours(k);
            *o = (x[next] - x[prev2]) * x[prev] - x[k];
        }
    }

    fn coupling(&self, _x: &[f64], out: &mut DMatrix<f64>) {
        out.fill(1.0);
    }
}
