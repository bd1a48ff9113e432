//! Observed convergence order from a refinement ladder.

use super::PdeError;

/// Errors at or below this are treated as exact and carry no order
/// information.
pub const ERROR_FLOOR: f64 = 1e-13;

/// Per-refinement observed orders `log₂(e_k / e_{k+1})` for grids `ns`,
/// each of which must double the previous one.
pub fn observed_order(
    ns: &[usize],
    mut error_at: impl FnMut(usize) -> Result<f64, PdeError>,
) -> Result<Vec<f64>, PdeError> {
    if ns.len() < 2 {
        return Err(PdeError::OrderUndetermined("need at least two grids".into()));
    }
    if ns.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(PdeError::OrderUndetermined(format!("ladder {ns:?} is not doubling")));
    }
    let errors = ns.iter().map(|&n| error_at(n)).collect::<Result<Vec<f64>, _>>()?;
    order_from_errors(&errors)
}

/// Orders from a precomputed error ladder on doubling grids.
pub fn order_from_errors(errors: &[f64]) -> Result<Vec<f64>, PdeError> {
    if let Some(e) = errors.iter().find(|e| !(e.is_finite() && **e > ERROR_FLOOR)) {
        return Err(PdeError::OrderUndetermined(format!(
            "error {e:e} at or below round-off"
        )));
    }
    if errors.windows(2).any(|w| w[1] >= w[0]) {
        return Err(PdeError::OrderUndetermined(format!(
            "errors not decreasing: {errors:?}"
        )));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}
