//! Errors and helpers shared by the two boundary-value flows.

use thiserror::Error;

use crate::diagnostics::DiagnosticsError;
use crate::geometry::GeometryError;
use crate::pde::PdeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invariant breach at t = {t}: {what}")]
    InvariantBreach { t: f64, what: String },
    #[error("graph parametrisation degenerated at t = {t}")]
    DegenerateGraph { t: f64 },
    #[error("curvature unresolved at t = {t} (sup|κ|·h = {kappa_h})")]
    Singularity { t: f64, kappa_h: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("time {0} outside the domain t < 0")]
    DomainError(f64),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

impl FlowError {
    /// Whether the error reports a violated geometric invariant rather than
    /// a numerical or configuration failure.
    pub fn is_invariant_breach(&self) -> bool {
        matches!(self, Self::InvariantBreach { .. })
    }
}

/// Least-squares slope of `ln y` against `t`, over the points with
/// `y > floor`. `None` with fewer than three such points.
pub fn fit_exponential_rate(t: &[f64], y: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > floor && v.is_finite())
        .map(|(a, b)| (*a, b.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Largest single increase along a sequence.
pub fn max_increase(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_rate() {
        let t: Vec<f64> = (0..10).map(|k| k as f64 * 0.5).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-1.7 * t).exp()).collect();
        assert!((fit_exponential_rate(&t, &y, 0.0).unwrap() + 1.7).abs() < 1e-12);
        assert!(fit_exponential_rate(&t[..2], &y[..2], 0.0).is_none());
    }

    #[test]
    fn increases() {
        assert_eq!(max_increase(&[3.0, 2.0, 2.5, 1.0]), 0.5);
        assert_eq!(max_increase(&[3.0, 2.0]), 0.0);
    }
}
