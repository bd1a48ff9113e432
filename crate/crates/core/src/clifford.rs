//! Rescaled flow of a disc with boundary on the Clifford torus.
//!
//! The profile is a radial graph `γ(r) = r e^{iφ(r)}`, `r ∈ [0, 2]`, of the
//! type-I rescaled flow `τ = -ln(-t)`, `γ̄ = γ/√(-t)`. In these variables
//! the Clifford torus is the fixed circle `|γ̄| = 2`, so the boundary
//! condition reduces to the angle relation `arctan(2φ′(2)) = -α`.
//!
//! The unrescaled mode integrates the plain flow on the shrinking domain
//! `r ∈ [0, 2√(-t)]`. In the coordinate `ρ = r/√(-t)` this is exactly the
//! rescaled equation with its right-hand side divided by `-t`, so both modes
//! share one discretisation and differ in the clock.

use std::sync::Arc;

use crate::diagnostics::{
    self, boundary_arclength_proxy, gaussian_density, huisken_value, DiagnosticsRecord, MonotonicityKernel,
};
use crate::flow::{fit_exponential_rate, FlowError};
use crate::geometry::{lagrangian_angle, PlanarPoint, ProfileCurve};
use crate::io::csv_row;
use crate::pde::{
    BoundaryCondition, Event, FieldState, Grid1D, ParabolicProblem, Solver, StepperConfig, Termination, Until,
};

/// Radius of the Clifford circle in rescaled variables.
pub const BOUNDARY_RADIUS: f64 = 2.0;
/// Unrescaled runs stop this far before the extinction time `t = 0`.
pub const EXTINCTION_GAP: f64 = 1e-3;

/// `∂φ/∂τ` at `r > 0`.
pub fn clifford_rescaled_rhs(r: f64, phi: f64, phip: f64, phipp: f64) -> f64 {
    let _ = phi;
    let lam2 = (r * phip).powi(2);
    ((r * phipp + r * r * phip.powi(3) + 2.0 * phip) / (1.0 + lam2) + phip - r * r * phip / 2.0) / r
}

/// Limit of [`clifford_rescaled_rhs`] at `r = 0` for even `φ`.
pub fn clifford_origin_rule(phi0: f64, phipp0: f64) -> f64 {
    let _ = phi0;
    4.0 * phipp0
}

/// Residual of the angle condition at `r = 2`.
pub fn clifford_boundary_relation(phi: f64, phip: f64, alpha: f64) -> f64 {
    let _ = phi;
    phip + alpha.tan() / BOUNDARY_RADIUS
}

/// `τ = -ln(-t)` and the curve scaled by `1/√(-t)`.
pub fn rescale_map(t: f64, curve: &ProfileCurve) -> Result<(f64, ProfileCurve), FlowError> {
    if !(t < 0.0) {
        return Err(FlowError::DomainError(t));
    }
    Ok((-(-t).ln(), curve.scaled(1.0 / (-t).sqrt())))
}

/// Inverse of [`rescale_map`].
pub fn unrescale_map(tau: f64, curve: &ProfileCurve) -> Result<(f64, ProfileCurve), FlowError> {
    if !tau.is_finite() {
        return Err(FlowError::DomainError(tau));
    }
    let t = -(-tau).exp();
    Ok((t, curve.scaled((-t).sqrt())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CliffordMode {
    Rescaled,
    /// Plain flow from `t0 < 0`.
    Unrescaled {
        t0: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliffordInitial {
    Constant(f64),
    /// `base + amplitude·cos(πr/2)`, plus the quadratic `c r²/4` fixing the
    /// boundary slope when `α ≠ 0`.
    Bump {
        base: f64,
        amplitude: f64,
    },
    /// Values on the grid nodes.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliffordConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub grid_n: usize,
    /// End of the run on the mode's own clock: `τ` when rescaled, `t`
    /// otherwise.
    pub t_final: f64,
    pub initial: CliffordInitial,
    pub stepper: StepperConfig,
    pub mode: CliffordMode,
}

impl Default for CliffordConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            epsilon: 0.1,
            grid_n: 400,
            t_final: 10.0,
            initial: CliffordInitial::Bump {
                base: 0.0,
                amplitude: 0.3,
            },
            stepper: StepperConfig::default(),
            mode: CliffordMode::Rescaled,
        }
    }
}

impl CliffordConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        if !(self.alpha.abs() < half_pi) {
            return Err(FlowError::InvalidConfig(format!(
                "alpha = {} outside (-π/2, π/2)",
                self.alpha
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < half_pi) {
            return Err(FlowError::InvalidConfig(format!(
                "epsilon = {} outside (0, π/2)",
                self.epsilon
            )));
        }
        if self.grid_n < 8 {
            return Err(FlowError::InvalidConfig(format!("grid_n = {} < 8", self.grid_n)));
        }
        match self.mode {
            CliffordMode::Rescaled => {
                if !(self.t_final > 0.0) {
                    return Err(FlowError::InvalidConfig("t_final must be positive".into()));
                }
            }
            CliffordMode::Unrescaled { t0 } => {
                if !(t0 < 0.0) {
                    return Err(FlowError::InvalidConfig(format!("t0 = {t0} must be negative")));
                }
                if !(self.t_final > t0 && self.t_final <= -EXTINCTION_GAP) {
                    return Err(FlowError::InvalidConfig(format!(
                        "t_final = {} must lie in ({t0}, {}]",
                        self.t_final, -EXTINCTION_GAP
                    )));
                }
            }
        }
        if let CliffordInitial::Custom(v) = &self.initial {
            if v.len() != self.grid_n + 1 {
                return Err(FlowError::InvalidConfig(format!(
                    "custom initial data has {} values, grid has {}",
                    v.len(),
                    self.grid_n + 1
                )));
            }
        }
        self.stepper
            .validate()
            .map_err(|e| FlowError::InvalidConfig(e.to_string()))
    }

    fn start_time(&self) -> f64 {
        match self.mode {
            CliffordMode::Rescaled => 0.0,
            CliffordMode::Unrescaled { t0 } => t0,
        }
    }
}

/// Radial graph on the uniform grid of `[0, 2]`, in rescaled variables.
/// `t` is the mode's clock.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordState {
    pub phi: Vec<f64>,
    pub t: f64,
}

impl CliffordState {
    pub fn h(&self) -> f64 {
        BOUNDARY_RADIUS / (self.phi.len() - 1) as f64
    }

    pub fn params(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.phi.len()).map(|i| i as f64 * h).collect()
    }

    /// `φ′` by centred differences, zero at the origin and second-order
    /// one-sided at `r = 2`.
    pub fn slope(&self) -> Vec<f64> {
        let n = self.phi.len() - 1;
        let h = self.h();
        let p = &self.phi;
        (0..=n)
            .map(|i| {
                if i == 0 {
                    0.0
                } else if i == n {
                    (3.0 * p[n] - 4.0 * p[n - 1] + p[n - 2]) / (2.0 * h)
                } else {
                    (p[i + 1] - p[i - 1]) / (2.0 * h)
                }
            })
            .collect()
    }

    /// Rescaled profile curve `r e^{iφ}`, origin at index 0.
    pub fn curve(&self) -> Result<ProfileCurve, FlowError> {
        let params = self.params();
        let points = params
            .iter()
            .zip(&self.phi)
            .map(|(r, p)| PlanarPoint::from_polar(*r, *p))
            .collect();
        Ok(ProfileCurve::new(params, points, Some(0))?)
    }

    /// Trapezoid mean of `φ` over `[0, 2]`.
    pub fn mean(&self) -> f64 {
        let n = self.phi.len() - 1;
        let inner: f64 = self.phi[1..n].iter().sum();
        (inner + 0.5 * (self.phi[0] + self.phi[n])) / n as f64
    }

    pub fn deviation(&self) -> f64 {
        let m = self.mean();
        self.phi.iter().fold(0.0, |a, p| a.max((p - m).abs()))
    }
}

/// `θ - 2φ = arctan(rφ′)` per node.
pub fn theta_minus_2phi(state: &CliffordState) -> Vec<f64> {
    state
        .params()
        .iter()
        .zip(state.slope())
        .map(|(r, p)| (r * p).atan())
        .collect()
}

/// Semi-discrete problem. In the unrescaled mode the right-hand side is
/// scaled by `1/(-t)` and implicit steps by `min(1, -t)`.
pub fn clifford_problem(alpha: f64, n: usize, mode: CliffordMode) -> Result<ParabolicProblem, FlowError> {
    let grid = Grid1D::new(0.0, BOUNDARY_RADIUS, n)?;
    let right = BoundaryCondition::ObliqueNonlinear {
        residual: Arc::new(move |phi, p, _| clifford_boundary_relation(phi, p, alpha)),
        chi: 1.0,
    };
    let problem = match mode {
        CliffordMode::Rescaled => ParabolicProblem::new(
            grid,
            Arc::new(|r, phi, p, pp, _| clifford_rescaled_rhs(r, phi, p, pp)),
            BoundaryCondition::SymmetryNeumann,
            right,
        )
        .with_origin_rule(Arc::new(|phi, pp, _| clifford_origin_rule(phi, pp))),
        CliffordMode::Unrescaled { .. } => ParabolicProblem::new(
            grid,
            Arc::new(|r, phi, p, pp, t| clifford_rescaled_rhs(r, phi, p, pp) / -t),
            BoundaryCondition::SymmetryNeumann,
            right,
        )
        .with_origin_rule(Arc::new(|phi, pp, t| clifford_origin_rule(phi, pp) / -t))
        .with_time_scale(Arc::new(|t| (-t).min(1.0))),
    };
    Ok(problem)
}

/// `sup |F| + |R|` of the discrete rescaled problem at `phi`.
pub fn discrete_residual(alpha: f64, n: usize, phi: &[f64]) -> Result<f64, FlowError> {
    let problem = clifford_problem(alpha, n, CliffordMode::Rescaled)?;
    let f = problem.rhs(phi, 0.0)?;
    let sup = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let last = phi.len() - 1;
    let ghost = problem.ghost(crate::pde::Side::Right, phi, 0.0)?;
    let slope = (ghost - phi[last - 1]) / (2.0 * problem.grid.h());
    Ok(sup + clifford_boundary_relation(phi[last], slope, alpha).abs())
}

/// Initial data on the grid, satisfying the boundary relation exactly for
/// the built-in profiles.
pub fn initial_state(config: &CliffordConfig) -> Result<CliffordState, FlowError> {
    config.validate()?;
    let n = config.grid_n;
    let h = BOUNDARY_RADIUS / n as f64;
    let slope = -config.alpha.tan() / BOUNDARY_RADIUS;
    let phi: Vec<f64> = match &config.initial {
        CliffordInitial::Constant(c) => {
            if config.alpha != 0.0 {
                return Err(FlowError::InvalidConfig(
                    "constant initial data requires alpha = 0".into(),
                ));
            }
            vec![*c; n + 1]
        }
        CliffordInitial::Bump { base, amplitude } => (0..=n)
            .map(|i| {
                let r = i as f64 * h;
                base + amplitude * (std::f64::consts::FRAC_PI_2 * r).cos() + slope * r * r / 4.0
            })
            .collect(),
        CliffordInitial::Custom(v) => {
            let end = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
            if (end - slope).abs() > 1e-6_f64.max(10.0 * h * h * (1.0 + slope.abs())) {
                return Err(FlowError::InvalidConfig(format!(
                    "custom data has boundary slope {end}, the angle condition needs {slope}"
                )));
            }
            v.clone()
        }
    };
    let state = CliffordState {
        phi,
        t: config.start_time(),
    };
    let band = std::f64::consts::FRAC_PI_2 - config.epsilon;
    let sup = band_sup(&state);
    if sup >= band {
        return Err(FlowError::InvalidConfig(format!(
            "initial data not admissible: sup|θ - 2φ| = {sup} ≥ {band}"
        )));
    }
    Ok(state)
}

fn band_sup(state: &CliffordState) -> f64 {
    theta_minus_2phi(state).iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// One row of the run-level CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordRow {
    pub tau: f64,
    pub phi_mean: f64,
    pub phi_dev: f64,
    pub theta2phi_max: f64,
    /// `d(φ mean)/dτ` since the previous row; NaN on the first.
    pub omega_fit: f64,
    pub area: f64,
    pub sup_a2: f64,
}

impl CliffordRow {
    pub const HEADER: &'static str = "tau,phi_mean,phi_dev,theta2phi_max,omega_fit,area,sup_A2";

    pub fn csv_row(&self) -> String {
        csv_row(&[
            self.tau,
            self.phi_mean,
            self.phi_dev,
            self.theta2phi_max,
            self.omega_fit,
            self.area,
            self.sup_a2,
        ])
    }
}

/// Result of [`run_clifford`].
#[derive(Debug, Clone)]
pub struct CliffordRun {
    pub mode: CliffordMode,
    pub outputs: Vec<CliffordState>,
    pub rows: Vec<CliffordRow>,
    pub records: Vec<DiagnosticsRecord>,
    /// Huisken quantity `∫(θ - 2φ)² Φ` of the physical surface at each
    /// output, kernel centred at the origin and the extinction time.
    pub monotone_quantity: Vec<f64>,
    pub final_state: CliffordState,
    pub termination: Termination,
    pub steps: usize,
    /// Fitted exponential rate of `sup |φ - mean φ|` over the second half of
    /// the outputs.
    pub decay_rate: Option<f64>,
}

impl CliffordRun {
    pub fn csv(&self) -> String {
        let mut out = String::from(CliffordRow::HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Rescaled time and physical scale factor of a state's clock value.
fn clock(mode: CliffordMode, t: f64) -> (f64, f64) {
    match mode {
        CliffordMode::Rescaled => (t, 1.0),
        CliffordMode::Unrescaled { .. } => (-(-t).ln(), (-t).sqrt()),
    }
}

/// Integrates from the configured initial data.
pub fn run_clifford(config: &CliffordConfig, output_times: &[f64]) -> Result<CliffordRun, FlowError> {
    let state = initial_state(config)?;
    run_clifford_from(config, state, output_times)
}

/// Integrates from an explicit state.
pub fn run_clifford_from(
    config: &CliffordConfig,
    state: CliffordState,
    output_times: &[f64],
) -> Result<CliffordRun, FlowError> {
    config.validate()?;
    if state.phi.len() != config.grid_n + 1 {
        return Err(FlowError::InvalidConfig("state does not match grid".into()));
    }
    let mode = config.mode;
    let problem = clifford_problem(config.alpha, config.grid_n, mode)?;
    let h = problem.grid.h();
    let solver = Solver::new(problem, config.stepper.clone())?;
    let band = band_sup(&state) + 10.0 * h * h;
    let global = MonotonicityKernel::global([0.0; 4], 0.0);

    let mut rows: Vec<CliffordRow> = Vec::new();
    let mut records = Vec::new();
    let mut monotone = Vec::new();
    let result = solver.run::<FlowError>(
        FieldState::new(state.phi, state.t),
        Until::FinalTime(config.t_final),
        output_times,
        |fs, event| {
            let st = CliffordState {
                phi: fs.u.clone(),
                t: fs.t,
            };
            let angle = theta_minus_2phi(&st);
            let sup = angle.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if sup > band {
                return Err(FlowError::InvariantBreach {
                    t: fs.t,
                    what: format!("sup|θ - 2φ| = {sup} exceeds {band}"),
                });
            }
            if event != Event::Output {
                return Ok(());
            }
            let (tau, scale) = clock(mode, fs.t);
            let rescaled = st.curve()?;
            let physical = rescaled.scaled(scale);
            let t_phys = -scale * scale;
            let weight: Vec<f64> = angle.iter().map(|a| a * a).collect();
            let huisken = huisken_value(&physical, t_phys, &global, Some(&weight))?;
            let area = diagnostics::area(&rescaled)?;
            let a2 = diagnostics::sup_a2(&rescaled)?;
            let theta = lagrangian_angle(&rescaled, 2)?;
            let mean = st.mean();
            let omega = rows
                .last()
                .map_or(f64::NAN, |prev| (mean - prev.phi_mean) / (tau - prev.tau));
            rows.push(CliffordRow {
                tau,
                phi_mean: mean,
                phi_dev: st.deviation(),
                theta2phi_max: sup,
                omega_fit: omega,
                area,
                sup_a2: a2,
            });
            records.push(DiagnosticsRecord {
                t_or_tau: fs.t,
                area,
                int_cos_theta: diagnostics::conserved_cos_theta(&rescaled, 2)?,
                theta_min: theta.min(),
                theta_max: theta.max(),
                theta2phi_max: Some(sup),
                sup_a2: a2,
                gaussian_density: gaussian_density(
                    &rescaled,
                    [0.0; 4],
                    crate::lawlor::DENSITY_RADIUS,
                    crate::lawlor::DENSITY_LOCALIZATION,
                )?,
                huisken_value: huisken,
                min_boundary_arclength: boundary_arclength_proxy(&rescaled),
            });
            monotone.push(huisken);
            Ok(())
        },
    )?;
    let half = rows.len() / 2;
    let decay_rate = fit_exponential_rate(
        &rows[half..].iter().map(|r| r.tau).collect::<Vec<_>>(),
        &rows[half..].iter().map(|r| r.phi_dev).collect::<Vec<_>>(),
        1e-13,
    );
    Ok(CliffordRun {
        mode,
        outputs: result
            .outputs
            .iter()
            .map(|fs| CliffordState {
                phi: fs.u.clone(),
                t: fs.t,
            })
            .collect(),
        rows,
        records,
        monotone_quantity: monotone,
        final_state: CliffordState {
            phi: result.final_state.u,
            t: result.final_state.t,
        },
        termination: result.termination,
        steps: result.steps,
        decay_rate,
    })
}

/// Rigid-rotation fit `φ(r, τ) ≈ φ̂(r) + ωτ` over a window of snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonFit {
    pub omega: f64,
    pub shape: Vec<f64>,
    /// RMS misfit of the model.
    pub residual: f64,
    /// Per-node least-squares slopes.
    pub node_omega: Vec<f64>,
    /// `max - min` of `node_omega`.
    pub spread: f64,
}

impl SolitonFit {
    /// Spread relative to `|ω|`.
    pub fn relative_spread(&self) -> f64 {
        self.spread / self.omega.abs()
    }
}

/// Snapshots needed for [`soliton_fit`].
pub const MIN_FIT_SNAPSHOTS: usize = 10;

/// Fits a rigid rotation to the snapshots whose `τ` lies in `window`.
pub fn soliton_fit(snapshots: &[(f64, Vec<f64>)], window: (f64, f64)) -> Result<SolitonFit, FlowError> {
    let sel: Vec<&(f64, Vec<f64>)> = snapshots
        .iter()
        .filter(|(tau, _)| *tau >= window.0 && *tau <= window.1)
        .collect();
    if sel.len() < MIN_FIT_SNAPSHOTS {
        return Err(FlowError::InsufficientData(format!(
            "{} snapshots in [{}, {}], need {MIN_FIT_SNAPSHOTS}",
            sel.len(),
            window.0,
            window.1
        )));
    }
    let nodes = sel[0].1.len();
    if sel.iter().any(|(_, p)| p.len() != nodes) {
        return Err(FlowError::InsufficientData("snapshots differ in length".into()));
    }
    let m = sel.len() as f64;
    let tau_mean = sel.iter().map(|s| s.0).sum::<f64>() / m;
    let sxx: f64 = sel.iter().map(|s| (s.0 - tau_mean).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FlowError::InsufficientData("window has a single time".into()));
    }
    let node_mean: Vec<f64> = (0..nodes)
        .map(|i| sel.iter().map(|s| s.1[i]).sum::<f64>() / m)
        .collect();
    let node_omega: Vec<f64> = (0..nodes)
        .map(|i| {
            sel.iter()
                .map(|s| (s.0 - tau_mean) * (s.1[i] - node_mean[i]))
                .sum::<f64>()
                / sxx
        })
        .collect();
    let omega = node_omega.iter().sum::<f64>() / nodes as f64;
    let shape: Vec<f64> = node_mean.iter().map(|a| a - omega * tau_mean).collect();
    let sq: f64 = sel
        .iter()
        .map(|(tau, p)| {
            p.iter()
                .zip(&shape)
                .map(|(v, s)| (v - s - omega * tau).powi(2))
                .sum::<f64>()
        })
        .sum();
    let residual = (sq / (m * nodes as f64)).sqrt();
    let (lo, hi) = node_omega
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), w| (a.min(*w), b.max(*w)));
    Ok(SolitonFit {
        omega,
        shape,
        residual,
        node_omega,
        spread: hi - lo,
    })
}

/// Barrier interval for `α = 0` runs.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub a_minus: f64,
    pub a_plus: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub tol: f64,
}

impl BarrierReport {
    pub fn holds(&self) -> bool {
        self.phi_min >= self.a_minus - self.tol && self.phi_max <= self.a_plus + self.tol
    }
}

/// `A_+ = max(θ_+/2, φ_+)`, `A_- = min(θ_-/2, φ_-)` from the first state;
/// every later state must keep `φ` in `[A_-, A_+]` up to `10h²`.
pub fn barrier_bounds(states: &[CliffordState]) -> Result<BarrierReport, FlowError> {
    let first = states
        .first()
        .ok_or_else(|| FlowError::InsufficientData("no states".into()))?;
    let theta: Vec<f64> = theta_minus_2phi(first)
        .iter()
        .zip(&first.phi)
        .map(|(a, p)| a + 2.0 * p)
        .collect();
    let fold = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)))
    };
    let (th_lo, th_hi) = fold(&theta);
    let (p_lo, p_hi) = fold(&first.phi);
    let h = first.h();
    let mut report = BarrierReport {
        a_minus: (th_lo / 2.0).min(p_lo),
        a_plus: (th_hi / 2.0).max(p_hi),
        phi_min: f64::INFINITY,
        phi_max: f64::NEG_INFINITY,
        tol: 10.0 * h * h,
    };
    for st in states {
        let (lo, hi) = fold(&st.phi);
        report.phi_min = report.phi_min.min(lo);
        report.phi_max = report.phi_max.max(hi);
        if !report.holds() {
            return Err(FlowError::InvariantBreach {
                t: st.t,
                what: format!(
                    "φ ∈ [{lo}, {hi}] leaves the barrier [{}, {}]",
                    report.a_minus, report.a_plus
                ),
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Normal speed of the curve `r e^{iφ}` under the rescaled flow
    /// `κ - ⟨γ,ν⟩/|γ|² + ⟨γ,ν⟩/2`, divided by the normal part of `∂γ/∂φ`.
    fn rhs_from_geometry(r: f64, phi: f64, p: f64, pp: f64) -> f64 {
        let e = PlanarPoint::from_polar(1.0, phi);
        let ie = e.rot90();
        let g = e * r;
        let d1 = e + ie * (r * p);
        let d2 = ie * (2.0 * p + r * pp) - e * (r * p * p);
        let speed = d1.norm();
        let nu = d1.rot90() * (1.0 / speed);
        let kappa = d1.cross(d2) / speed.powi(3);
        let speed_n = kappa - g.dot(nu) / g.norm_sq() + g.dot(nu) / 2.0;
        speed_n / (ie * r).dot(nu)
    }

    #[test]
    fn rhs_matches_geometric_derivation() {
        let (r, c) = (1.0, 0.05);
        let a = clifford_rescaled_rhs(r, c * r * r, 2.0 * c * r, 2.0 * c);
        let b = rhs_from_geometry(r, c * r * r, 2.0 * c * r, 2.0 * c);
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        for (r, phi, p, pp) in [(0.4, 0.3, -0.8, 1.5), (1.9, -1.0, 1.4, -0.3)] {
            let a = clifford_rescaled_rhs(r, phi, p, pp);
            assert!((a - rhs_from_geometry(r, phi, p, pp)).abs() < 1e-10);
        }
        assert_eq!(clifford_rescaled_rhs(1.3, 0.7, 0.0, 0.0), 0.0);
    }

    #[test]
    fn origin_rule_limits() {
        assert_eq!(clifford_origin_rule(0.4, 0.0), 0.0);
        let c = 0.3;
        assert_eq!(clifford_origin_rule(0.0, 2.0 * c), 8.0 * c);
        let r = 1e-3;
        let near = clifford_rescaled_rhs(r, c * r * r, 2.0 * c * r, 2.0 * c);
        assert!((near - 8.0 * c).abs() < 1e-4 * 8.0 * c);
        // Even sextic, Richardson in r².
        let (a, b, d) = (0.5, -0.2, 0.7);
        let f = |r: f64| {
            clifford_rescaled_rhs(
                r,
                a * r * r + b * r.powi(4) + d * r.powi(6),
                2.0 * a * r + 4.0 * b * r.powi(3) + 6.0 * d * r.powi(5),
                2.0 * a + 12.0 * b * r * r + 30.0 * d * r.powi(4),
            )
        };
        let extrapolated = (4.0 * f(5e-3) - f(1e-2)) / 3.0;
        let rule = clifford_origin_rule(0.0, 2.0 * a);
        assert!((extrapolated - rule).abs() < 1e-6 * rule.abs());
    }

    #[test]
    fn boundary_relation_values() {
        assert_eq!(clifford_boundary_relation(0.0, 0.0, 0.0), 0.0);
        assert_eq!(clifford_boundary_relation(0.0, 1.0, 0.0), 1.0);
        let alpha = -2.0 * std::f64::consts::PI / 5.0;
        let slope = -alpha.tan() / 2.0;
        assert!((slope - 1.538841768587627).abs() < 1e-12);
        assert!(clifford_boundary_relation(0.0, slope, alpha).abs() < 1e-15);
        assert!(((2.0 * slope).atan() + alpha).abs() < 1e-15);
    }

    #[test]
    fn static_shape_equation_only_has_zero() {
        // dλ/dr = -(λ + λ³)(2/r - r/2) shot back from λ(2) = 0.
        let f = |r: f64, l: f64| -(l + l.powi(3)) * (2.0 / r - r / 2.0);
        let mut l = 0.0;
        let steps = 1000;
        let dr = -1.9 / steps as f64;
        let mut r = 2.0;
        for _ in 0..steps {
            let k1 = f(r, l);
            let k2 = f(r + dr / 2.0, l + dr / 2.0 * k1);
            let k3 = f(r + dr / 2.0, l + dr / 2.0 * k2);
            let k4 = f(r + dr, l + dr * k3);
            l += dr / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            r += dr;
        }
        assert_eq!(l, 0.0);
    }

    #[test]
    fn angle_matches_reconstructed_curve() {
        let c = 0.2;
        let n = 400;
        let phi: Vec<f64> = (0..=n).map(|i| c * (2.0 * i as f64 / n as f64).powi(2)).collect();
        let st = CliffordState { phi, t: 0.0 };
        let ours = theta_minus_2phi(&st);
        let curve = st.curve().unwrap();
        let theta = lagrangian_angle(&curve, 2).unwrap();
        for (i, r) in st.params().iter().enumerate() {
            let exact = (2.0 * c * r * r).atan();
            assert!((ours[i] - exact).abs() < 1e-4);
            let geo = theta.values[i] - 2.0 * curve.points()[i].arg();
            if i > 0 {
                assert!((geo - exact).abs() < 1e-4, "i {i}: {geo} vs {exact}");
            }
        }
        assert_eq!(ours[0], 0.0);
        let flat = CliffordState {
            phi: vec![0.4; 51],
            t: 0.0,
        };
        assert!(theta_minus_2phi(&flat).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn angle_interior_converges() {
        // Interior nodes use centred differences: second order in h.
        let c = 0.2;
        let err = |n: usize| {
            let phi: Vec<f64> = (0..=n).map(|i| c * (2.0 * i as f64 / n as f64).powi(2)).collect();
            let st = CliffordState { phi, t: 0.0 };
            let curve = st.curve().unwrap();
            let theta = lagrangian_angle(&curve, 2).unwrap();
            (1..=n)
                .map(|i| {
                    let r = st.params()[i];
                    (theta.values[i] - 2.0 * curve.points()[i].arg() - (2.0 * c * r * r).atan()).abs()
                })
                .fold(0.0, f64::max)
        };
        let (a, b) = (err(200), err(400));
        assert!(b < 1e-6 || (a / b).log2() > 1.8, "{a} {b}");
    }

    #[test]
    fn rescale_maps() {
        let curve = ProfileCurve::from_fn(&crate::geometry::uniform_grid(0.0, 2.0, 64), |r| {
            PlanarPoint::from_polar(r, 0.3)
        })
        .unwrap();
        let (tau, same) = rescale_map(-1.0, &curve).unwrap();
        assert_eq!(tau, 0.0);
        assert_eq!(same.points(), curve.points());
        let shrinker = curve.scaled((0.3f64 * 4.0).sqrt() / 2.0);
        let (_, scaled) = rescale_map(-0.3, &shrinker).unwrap();
        assert!((scaled.points().last().unwrap().norm() - 2.0).abs() < 1e-14);
        let (tau, scaled) = rescale_map(-0.3, &curve).unwrap();
        let (t, back) = unrescale_map(tau, &scaled).unwrap();
        assert!((t + 0.3).abs() < 1e-14);
        for (a, b) in back.points().iter().zip(curve.points()) {
            assert!((*a - *b).norm() < 1e-14);
        }
        assert!(matches!(rescale_map(0.0, &curve), Err(FlowError::DomainError(_))));
        assert!(matches!(rescale_map(0.5, &curve), Err(FlowError::DomainError(_))));
    }

    #[test]
    fn static_discrete_residual() {
        for k in 0..10 {
            let c = -1.0 + 0.25 * k as f64;
            assert!(discrete_residual(0.0, 400, &vec![c; 401]).unwrap() < 1e-12);
        }
    }

    #[test]
    fn constant_stays_static() {
        let cfg = CliffordConfig {
            grid_n: 100,
            t_final: 1.0,
            initial: CliffordInitial::Constant(0.7),
            ..Default::default()
        };
        let run = run_clifford(&cfg, &[0.5, 1.0]).unwrap();
        assert!(run.final_state.phi.iter().all(|p| (p - 0.7).abs() < 1e-10));
        assert_eq!(run.rows.len(), 2);
    }

    #[test]
    fn initial_data_satisfies_angle_condition() {
        let alpha = -2.0 * std::f64::consts::PI / 5.0;
        let cfg = CliffordConfig {
            alpha,
            grid_n: 400,
            ..Default::default()
        };
        let st = initial_state(&cfg).unwrap();
        let angle = theta_minus_2phi(&st);
        assert!((angle[400] + alpha).abs() < 1e-4);
        let bad = CliffordConfig {
            alpha,
            initial: CliffordInitial::Custom(vec![0.0; 401]),
            ..cfg.clone()
        };
        assert!(matches!(initial_state(&bad), Err(FlowError::InvalidConfig(_))));
        let bad = CliffordConfig {
            mode: CliffordMode::Unrescaled { t0: 0.5 },
            ..cfg
        };
        assert!(matches!(bad.validate(), Err(FlowError::InvalidConfig(_))));
    }

    #[test]
    fn soliton_fit_recovers_rotation() {
        let shape: Vec<f64> = (0..21).map(|i| 0.1 * (i as f64 * 0.1).sin()).collect();
        let snaps: Vec<(f64, Vec<f64>)> = (0..=20)
            .map(|k| {
                let tau = 5.0 + 0.25 * k as f64;
                (tau, shape.iter().map(|s| s + 0.37 * tau).collect())
            })
            .collect();
        let fit = soliton_fit(&snaps, (5.0, 10.0)).unwrap();
        assert!((fit.omega - 0.37).abs() < 1e-8);
        assert!(fit.residual < 1e-12);
        assert!(fit.relative_spread() < 1e-8);
        for (a, b) in fit.shape.iter().zip(&shape) {
            assert!((a - b).abs() < 1e-10);
        }
        let still: Vec<(f64, Vec<f64>)> = (0..12).map(|k| (k as f64, shape.clone())).collect();
        let fit = soliton_fit(&still, (0.0, 11.0)).unwrap();
        assert!(fit.omega.abs() < 1e-14 && fit.residual < 1e-10);
        assert!(matches!(
            soliton_fit(&snaps, (5.0, 6.0)),
            Err(FlowError::InsufficientData(_))
        ));
    }

    #[test]
    fn barrier_pins_constants_and_catches_spikes() {
        let flat = CliffordState {
            phi: vec![0.2; 41],
            t: 0.0,
        };
        let report = barrier_bounds(&[flat.clone(), flat.clone()]).unwrap();
        assert!((report.a_minus - 0.2).abs() < 1e-12 && (report.a_plus - 0.2).abs() < 1e-12);
        let mut spiked = flat.clone();
        spiked.phi[20] += 0.1;
        assert!(matches!(
            barrier_bounds(&[flat, spiked]),
            Err(FlowError::InvariantBreach { .. })
        ));
    }

    #[test]
    fn unrescaled_and_rescaled_steps_commute() {
        let n = 100;
        let cfg = CliffordConfig {
            grid_n: n,
            ..Default::default()
        };
        let phi0 = initial_state(&cfg).unwrap().phi;
        let dt = 1e-4;
        let t0 = -1.0;
        let un = Solver::new(
            clifford_problem(0.0, n, CliffordMode::Unrescaled { t0 }).unwrap(),
            StepperConfig::default(),
        )
        .unwrap();
        let a = un.step(&FieldState::new(phi0.clone(), t0), dt).unwrap();
        let dtau = -(-(t0 + dt)).ln();
        let re = Solver::new(
            clifford_problem(0.0, n, CliffordMode::Rescaled).unwrap(),
            StepperConfig::default(),
        )
        .unwrap();
        let b = re.step(&FieldState::new(phi0.clone(), 0.0), dtau).unwrap();
        let diff = a.u.iter().zip(&b.u).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let moved = a.u.iter().zip(&phi0).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(moved > 1e-6);
        assert!(diff < 10.0 * dt * dt, "{diff}");
    }
}
