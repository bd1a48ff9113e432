//! Disc flowing with boundary on the Lawlor neck.
//!
//! The profile curve is written as a graph over the foliation of the plane
//! by the hyperbolae `Y(s, φ) = (s cosh φ, s sinh φ)`:
//! `γ(s) = (s cosh v(s), s sinh v(s))` for `s ∈ [0, 1]`. The level `s = 1` is
//! the Lawlor neck, so the boundary stays on it for free and only the angle
//! condition `θ = -α` remains, which becomes an oblique condition on `v′`.
//! Equivariance makes `v` even, so only the half `[0, 1]` is integrated,
//! with a symmetry node at the origin.

use std::sync::Arc;

use crate::diagnostics::{
    self, boundary_arclength_proxy, gaussian_density, huisken_value, DiagnosticsRecord, MonotonicityKernel,
};
use crate::flow::{fit_exponential_rate, FlowError};
use crate::geometry::{lagrangian_angle, wrap_angle, PlanarPoint, ProfileCurve};
use crate::io::csv_row;
use crate::pde::{
    solve_monotone, BoundaryCondition, Event, FieldState, Grid1D, ParabolicProblem, PdeError, Solver, StepperConfig,
    Termination, Until,
};

/// Width of the boundary layer used to make initial data compatible.
pub const BLEND_WIDTH: f64 = 0.05;
/// Below this `|γ′|²` the graph parametrisation is considered broken.
pub const DEGENERATE_SPEED_SQ: f64 = 1e-8;
/// Where `|cos θ|` drops below this the slope identity is compared as angles.
pub const POLE_GUARD: f64 = 0.1;
/// Radius of the Gaussian density recorded with each snapshot.
pub const DENSITY_RADIUS: f64 = 0.1;
/// Localisation radius of that density.
pub const DENSITY_LOCALIZATION: f64 = 0.5;

/// `∂v/∂t` at an interior point.
pub fn lawlor_rhs(s: f64, v: f64, vp: f64, vpp: f64) -> Result<f64, FlowError> {
    let speed_sq = gamma_prime_sq(s, v, vp);
    if speed_sq < DEGENERATE_SPEED_SQ {
        return Err(FlowError::DegenerateGraph { t: f64::NAN });
    }
    Ok((vpp + 2.0 * vp / s - s * vp.powi(3)) / speed_sq + vp / (s * (2.0 * v).cosh()))
}

/// `|γ′|²` of the graph `(s cosh v, s sinh v)`.
pub fn gamma_prime_sq(s: f64, v: f64, vp: f64) -> f64 {
    let (sh, ch) = (v.sinh(), v.cosh());
    (ch + s * vp * sh).powi(2) + (sh + s * vp * ch).powi(2)
}

/// Limit of [`lawlor_rhs`] at `s = 0` for even `v`.
pub fn lawlor_origin_rule(v0: f64, vpp0: f64) -> f64 {
    4.0 * vpp0 / (2.0 * v0).cosh()
}

/// Residual of the angle condition at `s = 1`; vanishes when `θ = -α` there.
pub fn lawlor_boundary_relation(v: f64, vp: f64, alpha: f64) -> f64 {
    vp - (-alpha).tan() / (2.0 * v).cosh() + (2.0 * v).tanh()
}

/// Limit disc `v ≡ artanh(tan(-α/2))`.
pub fn limit_value(alpha: f64) -> f64 {
    (-alpha / 2.0).tan().atanh()
}

/// Bound `V = artanh(tan(π/4 - ε/2))` on `|v|` for almost-calibrated discs.
pub fn v_bound(epsilon: f64) -> f64 {
    (std::f64::consts::FRAC_PI_4 - epsilon / 2.0).tan().atanh()
}

#[derive(Debug, Clone, PartialEq)]
pub enum LawlorInitial {
    Constant(f64),
    /// `v∞ + amplitude·exp(-(s/width)²)`.
    Bump {
        amplitude: f64,
        width: f64,
    },
    /// Values on the grid nodes.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawlorConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub grid_n: usize,
    pub t_final: f64,
    /// Stop early once the discrete right-hand side falls below
    /// `stepper.steady_tol`.
    pub stop_at_steady: bool,
    pub initial: LawlorInitial,
    pub stepper: StepperConfig,
}

impl Default for LawlorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            epsilon: 0.1,
            grid_n: 400,
            t_final: 10.0,
            stop_at_steady: false,
            initial: LawlorInitial::Bump {
                amplitude: 0.3,
                width: 0.3,
            },
            stepper: StepperConfig::default(),
        }
    }
}

impl LawlorConfig {
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
        if !(self.t_final > 0.0) {
            return Err(FlowError::InvalidConfig("t_final must be positive".into()));
        }
        if let LawlorInitial::Custom(v) = &self.initial {
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

    pub fn grid(&self) -> Result<Grid1D, FlowError> {
        Ok(Grid1D::new(0.0, 1.0, self.grid_n)?)
    }
}

/// Graph function on the uniform grid of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LawlorState {
    pub v: Vec<f64>,
    pub t: f64,
}

impl LawlorState {
    pub fn h(&self) -> f64 {
        1.0 / (self.v.len() - 1) as f64
    }

    pub fn params(&self) -> Vec<f64> {
        let n = self.v.len() - 1;
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    /// Profile curve `(s cosh v, s sinh v)` with the origin at index 0.
    pub fn curve(&self) -> Result<ProfileCurve, FlowError> {
        let params = self.params();
        let points = params
            .iter()
            .zip(&self.v)
            .map(|(s, v)| PlanarPoint::new(s * v.cosh(), s * v.sinh()))
            .collect();
        Ok(ProfileCurve::new(params, points, Some(0))?)
    }

    /// `v′` by centred differences, zero at the symmetry node and
    /// second-order one-sided at `s = 1`.
    pub fn slope(&self) -> Vec<f64> {
        let n = self.v.len() - 1;
        let h = self.h();
        let v = &self.v;
        (0..=n)
            .map(|i| {
                if i == 0 {
                    0.0
                } else if i == n {
                    (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h)
                } else {
                    (v[i + 1] - v[i - 1]) / (2.0 * h)
                }
            })
            .collect()
    }
}

/// Semi-discrete problem for boundary angle `-alpha` on `n` intervals.
pub fn lawlor_problem(alpha: f64, n: usize) -> Result<ParabolicProblem, FlowError> {
    let grid = Grid1D::new(0.0, 1.0, n)?;
    Ok(ParabolicProblem::new(
        grid,
        Arc::new(|s, v, vp, vpp, _| lawlor_rhs(s, v, vp, vpp).unwrap_or(f64::NAN)),
        BoundaryCondition::SymmetryNeumann,
        BoundaryCondition::ObliqueNonlinear {
            residual: Arc::new(move |v, vp, _| lawlor_boundary_relation(v, vp, alpha)),
            chi: 1.0,
        },
    )
    .with_origin_rule(Arc::new(|v, vpp, _| lawlor_origin_rule(v, vpp))))
}

/// `sup |F| + |R|` of the discrete problem at the constant state `v`.
pub fn discrete_residual(alpha: f64, n: usize, v: &[f64]) -> Result<f64, FlowError> {
    let problem = lawlor_problem(alpha, n)?;
    let f = problem.rhs(v, 0.0)?;
    let sup = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let h = problem.grid.h();
    let last = v.len() - 1;
    let ghost = problem.ghost(crate::pde::Side::Right, v, 0.0)?;
    let slope = (ghost - v[last - 1]) / (2.0 * h);
    Ok(sup + lawlor_boundary_relation(v[last], slope, alpha).abs())
}

/// Cubic boundary-layer profile: zero on `[0, 1 - BLEND_WIDTH]`, `C²`, and
/// unit slope at `s = 1`.
fn blend(s: f64) -> (f64, f64) {
    let d = s - (1.0 - BLEND_WIDTH);
    if d <= 0.0 {
        (0.0, 0.0)
    } else {
        let w2 = BLEND_WIDTH * BLEND_WIDTH;
        (d.powi(3) / (3.0 * w2), d * d / w2)
    }
}

/// Initial data on the grid, corrected near `s = 1` so that the boundary
/// relation holds exactly.
pub fn initial_state(config: &LawlorConfig) -> Result<LawlorState, FlowError> {
    config.validate()?;
    let n = config.grid_n;
    let h = 1.0 / n as f64;
    let v_inf = limit_value(config.alpha);
    let params: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let (base, end_value, end_slope): (Vec<f64>, f64, f64) = match &config.initial {
        LawlorInitial::Constant(c) => (vec![*c; n + 1], *c, 0.0),
        LawlorInitial::Bump { amplitude, width } => {
            let f = |s: f64| v_inf + amplitude * (-(s / width).powi(2)).exp();
            let slope = -2.0 * amplitude / (width * width) * (-(1.0 / width).powi(2)).exp();
            (params.iter().map(|s| f(*s)).collect(), f(1.0), slope)
        }
        LawlorInitial::Custom(v) => {
            let slope = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
            (v.clone(), v[n], slope)
        }
    };
    let (w1, _) = blend(1.0);
    let residual = |c: f64| lawlor_boundary_relation(end_value + c * w1, end_slope + c, config.alpha);
    let root = solve_monotone(residual, 0.0, 1e-14, 1e6)
        .ok_or_else(|| FlowError::InvalidConfig("initial data cannot be made compatible at s = 1".into()))?;
    let v: Vec<f64> = params
        .iter()
        .zip(&base)
        .map(|(s, b)| b + root.x * blend(*s).0)
        .collect();
    let state = LawlorState { v, t: 0.0 };
    check_admissible(&state, config.epsilon)
        .map_err(|what| FlowError::InvalidConfig(format!("initial data not admissible: {what}")))?;
    Ok(state)
}

fn check_admissible(state: &LawlorState, epsilon: f64) -> Result<(), String> {
    let bound = v_bound(epsilon);
    let sup = state.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup >= bound {
        return Err(format!("sup|v| = {sup} ≥ V = {bound}"));
    }
    let curve = state.curve().map_err(|e| e.to_string())?;
    let theta = lagrangian_angle(&curve, 2).map_err(|e| e.to_string())?;
    let limit = std::f64::consts::FRAC_PI_2 - epsilon;
    if theta.max() >= limit || theta.min() <= -limit {
        return Err(format!(
            "θ ∈ [{}, {}] leaves (-π/2 + ε, π/2 - ε)",
            theta.min(),
            theta.max()
        ));
    }
    Ok(())
}

/// Residual of `s v′ cosh 2v + sinh 2v = tan θ`, with θ taken from the
/// reconstructed curve. Near the pole of `tan` the angles are compared.
pub fn c1_consistency(state: &LawlorState) -> Result<Vec<f64>, FlowError> {
    let curve = state.curve()?;
    let theta = lagrangian_angle(&curve, 2)?;
    let slope = state.slope();
    Ok(state
        .params()
        .iter()
        .zip(&state.v)
        .zip(&slope)
        .zip(&theta.values)
        .map(|(((s, v), vp), th)| {
            let lhs = s * vp * (2.0 * v).cosh() + (2.0 * v).sinh();
            if th.cos().abs() > POLE_GUARD {
                lhs - th.tan()
            } else {
                wrap_angle(th - lhs.atan())
            }
        })
        .collect())
}

/// One row of the run-level CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LawlorRow {
    pub t: f64,
    pub sup_v_dev: f64,
    pub int_cos_theta: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub sup_a2: f64,
    pub area: f64,
}

impl LawlorRow {
    pub const HEADER: &'static str = "t,sup_v_dev,int_cos_theta,theta_min,theta_max,sup_A2,area";

    pub fn csv_row(&self) -> String {
        csv_row(&[
            self.t,
            self.sup_v_dev,
            self.int_cos_theta,
            self.theta_min,
            self.theta_max,
            self.sup_a2,
            self.area,
        ])
    }
}

/// Result of [`run_lawlor`].
#[derive(Debug, Clone)]
pub struct LawlorRun {
    pub v_inf: f64,
    pub outputs: Vec<LawlorState>,
    pub rows: Vec<LawlorRow>,
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: LawlorState,
    pub termination: Termination,
    pub steps: usize,
    /// Largest `sup |A|²` over the outputs.
    pub running_max_a2: f64,
    /// Geometric `θ` at `s = 1` at each output.
    pub boundary_theta: Vec<f64>,
    /// Fitted exponential rate of `sup |v - v∞|` over the second half of
    /// the outputs.
    pub decay_rate: Option<f64>,
}

impl LawlorRun {
    pub fn final_deviation(&self) -> f64 {
        sup_dev(&self.final_state.v, self.v_inf)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(LawlorRow::HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_row());
            out.push('\n');
        }
        out
    }
}

fn sup_dev(v: &[f64], target: f64) -> f64 {
    v.iter().fold(0.0, |m, x| m.max((x - target).abs()))
}

/// Range of `θ = arctan(s v′ cosh 2v + sinh 2v)` with centred slopes; the
/// per-step band check.
fn angle_range(v: &[f64]) -> (f64, f64) {
    let n = v.len() - 1;
    let h = 1.0 / n as f64;
    (0..=n)
        .map(|i| {
            let s = i as f64 * h;
            let vp = match i {
                0 => 0.0,
                i if i == n => (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h),
                _ => (v[i + 1] - v[i - 1]) / (2.0 * h),
            };
            (s * vp * (2.0 * v[i]).cosh() + (2.0 * v[i]).sinh()).atan()
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)))
}

/// Largest turning angle between consecutive chords of the profile, a
/// proxy for `sup |κ| · h`.
fn max_turning(v: &[f64]) -> f64 {
    let n = v.len() - 1;
    let pts: Vec<PlanarPoint> = v
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let s = i as f64 / n as f64;
            PlanarPoint::new(s * v.cosh(), s * v.sinh())
        })
        .collect();
    pts.windows(3)
        .map(|w| {
            let (a, b) = (w[1] - w[0], w[2] - w[1]);
            a.cross(b).atan2(a.dot(b)).abs()
        })
        .fold(0.0, f64::max)
}

/// Integrates the flow from the configured initial data.
pub fn run_lawlor(config: &LawlorConfig, output_times: &[f64]) -> Result<LawlorRun, FlowError> {
    let state = initial_state(config)?;
    run_lawlor_from(config, state, output_times)
}

/// Integrates the flow from an explicit state.
pub fn run_lawlor_from(
    config: &LawlorConfig,
    state: LawlorState,
    output_times: &[f64],
) -> Result<LawlorRun, FlowError> {
    config.validate()?;
    if state.v.len() != config.grid_n + 1 {
        return Err(FlowError::InvalidConfig("state does not match grid".into()));
    }
    let alpha = config.alpha;
    let v_inf = limit_value(alpha);
    let problem = lawlor_problem(alpha, config.grid_n)?;
    let h = problem.grid.h();
    let solver = Solver::new(problem, config.stepper.clone())?;
    let slack = 10.0 * h * h;
    let band = std::f64::consts::FRAC_PI_2 - config.epsilon + slack;
    let v_limit = v_bound(config.epsilon) + slack;
    let kernel = MonotonicityKernel::global([0.0; 4], config.t_final + 1.0);

    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut running_max_a2: f64 = 0.0;
    let mut boundary_theta = Vec::new();
    let mut last_state: Option<FieldState> = None;

    let until = if config.stop_at_steady {
        Until::Steady {
            tol: config.stepper.steady_tol,
            t_max: config.t_final,
        }
    } else {
        Until::FinalTime(config.t_final)
    };

    let result = solver.run::<FlowError>(FieldState::new(state.v, state.t), until, output_times, |fs, event| {
        last_state = Some(fs.clone());
        let (lo, hi) = angle_range(&fs.u);
        if hi > band || lo < -band {
            return Err(FlowError::InvariantBreach {
                t: fs.t,
                what: format!("θ ∈ [{lo}, {hi}] left the almost-calibrated band"),
            });
        }
        let sup_v = fs.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup_v > v_limit {
            return Err(FlowError::InvariantBreach {
                t: fs.t,
                what: format!("sup|v| = {sup_v} exceeds the barrier {v_limit}"),
            });
        }
        let kappa_h = max_turning(&fs.u);
        if kappa_h > 1.0 {
            return Err(FlowError::Singularity { t: fs.t, kappa_h });
        }
        if event == Event::Output {
            let st = LawlorState {
                v: fs.u.clone(),
                t: fs.t,
            };
            let curve = st.curve()?;
            let theta = lagrangian_angle(&curve, 2)?;
            let a2 = diagnostics::sup_a2(&curve)?;
            running_max_a2 = running_max_a2.max(a2);
            boundary_theta.push(*theta.values.last().unwrap_or(&f64::NAN));
            let cos: Vec<f64> = theta.values.iter().map(|t| t.cos()).collect();
            let int_cos = crate::geometry::equivariant_integral(&curve, &cos)?;
            let area = diagnostics::area(&curve)?;
            let weight: Vec<f64> = theta.values.iter().map(|t| (t + alpha).powi(2)).collect();
            let huisken = huisken_value(&curve, fs.t, &kernel, Some(&weight))?;
            let density = gaussian_density(&curve, [0.0; 4], DENSITY_RADIUS, DENSITY_LOCALIZATION)?;
            rows.push(LawlorRow {
                t: fs.t,
                sup_v_dev: sup_dev(&fs.u, v_inf),
                int_cos_theta: int_cos,
                theta_min: theta.min(),
                theta_max: theta.max(),
                sup_a2: a2,
                area,
            });
            records.push(DiagnosticsRecord {
                t_or_tau: fs.t,
                area,
                int_cos_theta: int_cos,
                theta_min: theta.min(),
                theta_max: theta.max(),
                theta2phi_max: None,
                sup_a2: a2,
                gaussian_density: density,
                huisken_value: huisken,
                min_boundary_arclength: boundary_arclength_proxy(&curve),
            });
        }
        Ok(())
    });

    let traj = match result {
        Ok(traj) => traj,
        Err(FlowError::Pde(e @ (PdeError::NonFinite { .. } | PdeError::StiffnessFailure { .. }))) => {
            // A broken graph shows up as a non-finite right-hand side.
            if let Some(fs) = &last_state {
                let st = LawlorState {
                    v: fs.u.clone(),
                    t: fs.t,
                };
                let degenerate = st
                    .params()
                    .iter()
                    .zip(&st.v)
                    .zip(st.slope())
                    .any(|((s, v), vp)| gamma_prime_sq(*s, *v, vp) < DEGENERATE_SPEED_SQ);
                if degenerate {
                    return Err(FlowError::DegenerateGraph { t: fs.t });
                }
            }
            return Err(FlowError::Pde(e));
        }
        Err(e) => return Err(e),
    };

    let outputs: Vec<LawlorState> = traj
        .outputs
        .iter()
        .map(|fs| LawlorState {
            v: fs.u.clone(),
            t: fs.t,
        })
        .collect();
    let half = rows.len() / 2;
    let decay_rate = fit_exponential_rate(
        &rows[half..].iter().map(|r| r.t).collect::<Vec<_>>(),
        &rows[half..].iter().map(|r| r.sup_v_dev).collect::<Vec<_>>(),
        1e-12,
    );
    Ok(LawlorRun {
        v_inf,
        outputs,
        rows,
        records,
        final_state: LawlorState {
            v: traj.final_state.u,
            t: traj.final_state.t,
        },
        termination: traj.termination,
        steps: traj.steps,
        running_max_a2,
        boundary_theta,
        decay_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `lawlor_rhs` written out from the curve: the normal speed
    /// `κ - ⟨γ,ν⟩/|γ|²` divided by the normal component of `∂γ/∂v`.
    fn rhs_from_geometry(s: f64, v: f64, vp: f64, vpp: f64) -> f64 {
        let (sh, ch) = (v.sinh(), v.cosh());
        let g = PlanarPoint::new(s * ch, s * sh);
        let d1 = PlanarPoint::new(ch + s * vp * sh, sh + s * vp * ch);
        let d2 = PlanarPoint::new(
            2.0 * vp * sh + s * vpp * sh + s * vp * vp * ch,
            2.0 * vp * ch + s * vpp * ch + s * vp * vp * sh,
        );
        let speed = d1.norm();
        let nu = d1.rot90() * (1.0 / speed);
        let kappa = d1.cross(d2) / speed.powi(3);
        let normal_speed = kappa - g.dot(nu) / g.norm_sq();
        let dgamma_dv = PlanarPoint::new(s * sh, s * ch);
        normal_speed / dgamma_dv.dot(nu)
    }

    #[test]
    fn rhs_matches_geometric_derivation() {
        let s = 0.5;
        let v = 0.1 * s * s;
        let vp = 0.2 * s;
        let vpp = 0.2;
        let a = lawlor_rhs(s, v, vp, vpp).unwrap();
        let b = rhs_from_geometry(s, v, vp, vpp);
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        for (s, v, vp, vpp) in [(0.3, -0.4, 0.7, -2.0), (0.9, 0.5, -1.1, 3.0)] {
            let a = lawlor_rhs(s, v, vp, vpp).unwrap();
            assert!((a - rhs_from_geometry(s, v, vp, vpp)).abs() < 1e-10);
        }
    }

    #[test]
    fn static_lines() {
        for alpha in [-1.2, -0.3, 0.0, 0.8, 1.2] {
            let v0 = limit_value(alpha);
            assert!(lawlor_rhs(0.4, v0, 0.0, 0.0).unwrap() == 0.0);
            assert!(lawlor_boundary_relation(v0, 0.0, alpha).abs() < 1e-12);
            assert!(((2.0 * v0).sinh() - (-alpha).tan()).abs() < 1e-12);
        }
        assert_eq!(lawlor_rhs(0.7, 0.0, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn boundary_relation_values() {
        assert_eq!(lawlor_boundary_relation(0.0, 0.0, 0.0), 0.0);
        assert_eq!(lawlor_boundary_relation(0.0, 1.0, 0.0), 1.0);
        let v = (-0.4f64).tan().atanh();
        assert!((v + 0.451088349).abs() < 1e-9);
        assert!(lawlor_boundary_relation(v, 0.0, 0.8).abs() < 1e-12);
    }

    #[test]
    fn origin_rule_limits() {
        assert_eq!(lawlor_origin_rule(0.3, 0.0), 0.0);
        let c = 0.7;
        assert_eq!(lawlor_origin_rule(0.0, 2.0 * c), 4.0 * 2.0 * c);
        let s = 1e-3;
        let near = lawlor_rhs(s, c * s * s, 2.0 * c * s, 2.0 * c).unwrap();
        assert!((near - 8.0 * c).abs() < 1e-4 * 8.0 * c);
    }

    #[test]
    fn origin_rule_quartic_richardson() {
        // v = a + b s² + c s⁴ with v(0) ≠ 0.
        let (a, b, c) = (0.2, 0.3, -0.5);
        let f = |s: f64| {
            lawlor_rhs(
                s,
                a + b * s * s + c * s.powi(4),
                2.0 * b * s + 4.0 * c * s.powi(3),
                2.0 * b + 12.0 * c * s * s,
            )
            .unwrap()
        };
        let (s1, s2) = (1e-2, 5e-3);
        let extrapolated = (4.0 * f(s2) - f(s1)) / 3.0;
        let rule = lawlor_origin_rule(a, 2.0 * b);
        assert!((extrapolated - rule).abs() < 1e-4 * rule.abs());
    }

    #[test]
    fn v_bound_value() {
        let v = v_bound(0.1);
        assert!((v - (std::f64::consts::FRAC_PI_4 - 0.05).tan().atanh()).abs() < 1e-15);
        assert!((v - 1.4983).abs() < 1e-3);
    }

    #[test]
    fn static_discrete_residual() {
        for k in 0..20 {
            let alpha = -1.2 + 2.4 * k as f64 / 19.0;
            let v = vec![limit_value(alpha); 401];
            assert!(discrete_residual(alpha, 400, &v).unwrap() < 1e-12, "alpha {alpha}");
        }
    }

    #[test]
    fn projection_makes_boundary_compatible() {
        for initial in [
            LawlorInitial::Bump {
                amplitude: 0.3,
                width: 0.3,
            },
            LawlorInitial::Constant(0.1),
            LawlorInitial::Custom((0..=2000).map(|i| 0.05 * (i as f64 / 2000.0).powi(2)).collect()),
        ] {
            let cfg = LawlorConfig {
                alpha: 0.8,
                grid_n: 2000,
                initial,
                ..Default::default()
            };
            let st = initial_state(&cfg).unwrap();
            let curve = st.curve().unwrap();
            let theta = lagrangian_angle(&curve, 2).unwrap();
            assert!((theta.values[2000] + 0.8).abs() < 1e-3, "{}", theta.values[2000]);
            // Away from the blend layer the data is untouched.
            if let LawlorInitial::Constant(c) = cfg.initial {
                assert_eq!(st.v[1000], c);
            }
        }
    }

    #[test]
    fn inadmissible_initial_data_rejected() {
        let cfg = LawlorConfig {
            initial: LawlorInitial::Constant(1.6),
            ..Default::default()
        };
        assert!(matches!(initial_state(&cfg), Err(FlowError::InvalidConfig(_))));
        let cfg = LawlorConfig {
            alpha: 1.6,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(FlowError::InvalidConfig(_))));
    }

    #[test]
    fn c1_identity_on_constants_and_pole() {
        for v0 in [0.0, -0.45, 1.6] {
            let st = LawlorState {
                v: vec![v0; 201],
                t: 0.0,
            };
            let r = c1_consistency(&st).unwrap();
            assert!(r.iter().all(|x| x.abs() < 1e-10), "v0 = {v0}");
        }
    }

    #[test]
    fn c1_identity_converges() {
        let f = |s: f64| 0.2 * (1.3 * s * s).cos() - 0.1 * s.powi(4);
        let errs: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&n| {
                let v = (0..=n).map(|i| f(i as f64 / n as f64)).collect();
                let r = c1_consistency(&LawlorState { v, t: 0.0 }).unwrap();
                r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
        }
    }

    #[test]
    fn static_run_stays_put() {
        let alpha = 0.8;
        let v0 = limit_value(alpha);
        let cfg = LawlorConfig {
            alpha,
            grid_n: 100,
            t_final: 0.5,
            initial: LawlorInitial::Constant(v0),
            ..Default::default()
        };
        let run = run_lawlor(&cfg, &[0.25, 0.5]).unwrap();
        assert!(run.final_deviation() < 1e-10);
        assert_eq!(run.rows.len(), 2);
    }

    #[test]
    fn short_bump_run_decays() {
        let cfg = LawlorConfig {
            alpha: 0.8,
            grid_n: 100,
            t_final: 1.0,
            ..Default::default()
        };
        let times: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).collect();
        let run = run_lawlor(&cfg, &times).unwrap();
        assert_eq!(run.rows.len(), 11);
        assert!(run.rows.last().unwrap().sup_v_dev < 0.5 * run.rows[0].sup_v_dev);
        assert!(run.records.iter().all(|r| r.is_valid()));
        assert!(run.csv().starts_with(LawlorRow::HEADER));
    }
}
