use crate::error::{invalid, shape, Result};
use crate::scene::ExtinctionField;

/// Relative L1 error `ε` and relative mass bias `δ` of an estimate.
pub fn epsilon_delta(truth: &ExtinctionField, estimate: &ExtinctionField) -> Result<(f64, f64)> {
    if truth.grid != estimate.grid || truth.len() != estimate.len() {
        return Err(shape("truth and estimate live on different grids"));
    }
    let n = truth.l1();
    if !(n > 0.0) {
        return Err(invalid("relative errors need a non-zero true field"));
    }
    let d: f64 = truth.beta.iter().zip(&estimate.beta).map(|(a, b)| (a - b).abs()).sum();
    Ok((d / n, (n - estimate.l1()) / n))
}
