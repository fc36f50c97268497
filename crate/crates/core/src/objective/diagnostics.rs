use nalgebra::DMatrix;

use crate::{Error, Result};

/// Hessian of `Σ ‖x_{i+1} − x_i‖²` (all gaps zero) with respect to the
/// first `T/2` states, for `T` even.
///
/// Block tridiagonal with `2I` in the top-left, `4I` elsewhere on the
/// diagonal and `−2I` off it; its determinant is `2^{dT/2}`.
pub fn half_block_hessian_delta0(d: usize, t: usize) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::contract("state dimension must be positive"));
    }
    if t < 2 || t % 2 != 0 {
        return Err(Error::contract(format!(
            "T must be even and at least 2, got {t}; for odd T use the first (T−1)/2 states"
        )));
    }
    let blocks = t / 2;
    let n = blocks * d;
    let mut a = DMatrix::zeros(n, n);
    for b in 0..blocks {
        let diag = if b == 0 { 2.0 } else { 4.0 };
        for r in 0..d {
            a[(b * d + r, b * d + r)] = diag;
            if b + 1 < blocks {
                a[(b * d + r, (b + 1) * d + r)] = -2.0;
                a[((b + 1) * d + r, b * d + r)] = -2.0;
            }
        }
    }
    Ok(a)
}
