//! Method-of-lines integrator for scalar quasilinear parabolic equations
//! `u_t = F(x, u, u_x, u_xx, t)` on a uniform grid.
//!
//! Spatial derivatives are centered second-order differences. Boundaries are
//! closed with ghost nodes: reflection for symmetry conditions and a scalar
//! root solve of the boundary relation for oblique conditions. A degenerate
//! left endpoint (a polar origin) can be given its own regularised right-hand
//! side through an origin rule.

mod order;
mod root;
mod tridiag;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use order::{observed_order, order_from_errors};
pub use root::{solve_monotone, Root};
pub use tridiag::Tridiagonal;

/// Right-hand side `F(x, u, u_x, u_xx, t)`.
pub type RhsFn = Arc<dyn Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync>;
/// Boundary relation `R(u, u_x, t)`.
pub type ResidualFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Regularised right-hand side at the origin, `(u, u_xx, t)`.
pub type OriginFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Scalar function of time.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tolerance of the oblique boundary root solve.
pub const GHOST_TOL: f64 = 1e-12;
/// Largest boundary slope searched for by the oblique root solve.
pub const GHOST_SLOPE_LIMIT: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("state has {got} values, grid has {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("{side} boundary relation has no root at t = {t} (u = {u})")]
    BoundaryRootFailure { side: Side, t: f64, u: f64 },
    #[error("time step underflow at t = {t} (dt = {dt:e})")]
    StiffnessFailure { t: f64, dt: f64 },
    #[error("maximum step count {0} exceeded")]
    MaxStepsExceeded(usize),
    #[error("problem is not parabolic at x = {x} (diffusion {coefficient:e})")]
    NonParabolic { x: f64, coefficient: f64 },
    #[error("observed order undetermined: {0}")]
    OrderUndetermined(String),
    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// Uniform grid `a = x_0 < … < x_N = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    intervals: usize,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, intervals: usize) -> Result<Self, PdeError> {
        if intervals < 8 {
            return Err(PdeError::InvalidGrid(format!("N = {intervals} < 8")));
        }
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(PdeError::InvalidGrid(format!("bad interval [{a}, {b}]")));
        }
        Ok(Self { a, b, intervals })
    }

    /// Accepts explicit nodes if they are uniform to 1e-12 relative.
    pub fn from_nodes(nodes: &[f64]) -> Result<Self, PdeError> {
        if nodes.len() < 2 {
            return Err(PdeError::InvalidGrid("fewer than two nodes".into()));
        }
        let grid = Self::new(nodes[0], nodes[nodes.len() - 1], nodes.len() - 1)?;
        let h = grid.h();
        for (i, x) in nodes.iter().enumerate() {
            if (x - grid.node(i)).abs() > 1e-12 * h {
                return Err(PdeError::InvalidGrid(format!("node {i} breaks uniform spacing")));
            }
        }
        Ok(grid)
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.intervals as f64
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.intervals {
            self.b
        } else {
            self.a + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }
}

#[derive(Clone)]
pub enum BoundaryCondition {
    /// `u = g(t)`.
    Dirichlet(TimeFn),
    /// `u_x = 0` by even reflection.
    SymmetryNeumann,
    /// `R(u, u_x, t) = 0` with `|∂R/∂u_x| ≥ chi`.
    ObliqueNonlinear { residual: ResidualFn, chi: f64 },
    /// Outward flux `u_x = q(t)` imposed with a first-order one-sided
    /// difference. Only useful as a low-order reference.
    OneSidedNeumann(TimeFn),
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dirichlet(_) => f.write_str("Dirichlet"),
            Self::SymmetryNeumann => f.write_str("SymmetryNeumann"),
            Self::ObliqueNonlinear { chi, .. } => write!(f, "ObliqueNonlinear {{ chi: {chi} }}"),
            Self::OneSidedNeumann(_) => f.write_str("OneSidedNeumann"),
        }
    }
}

/// The semi-discrete problem.
#[derive(Clone)]
pub struct ParabolicProblem {
    pub grid: Grid1D,
    pub interior_rhs: RhsFn,
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
    /// Replaces the right-hand side at `x_0` when the left boundary is a
    /// symmetry node. Receives `u_0` and the reflected `u_xx`.
    pub origin_rule: Option<OriginFn>,
    /// Multiplies the implicit step-size bound; lets problems whose speed
    /// grows in time shrink their steps accordingly.
    pub time_scale: Option<TimeFn>,
}

impl fmt::Debug for ParabolicProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParabolicProblem")
            .field("grid", &self.grid)
            .field("left", &self.left)
            .field("right", &self.right)
            .field("origin_rule", &self.origin_rule.is_some())
            .finish()
    }
}

impl ParabolicProblem {
    pub fn new(grid: Grid1D, interior_rhs: RhsFn, left: BoundaryCondition, right: BoundaryCondition) -> Self {
        Self {
            grid,
            interior_rhs,
            left,
            right,
            origin_rule: None,
            time_scale: None,
        }
    }

    pub fn with_origin_rule(mut self, rule: OriginFn) -> Self {
        self.origin_rule = Some(rule);
        self
    }

    pub fn with_time_scale(mut self, scale: TimeFn) -> Self {
        self.time_scale = Some(scale);
        self
    }

    fn check_shape(&self, u: &[f64]) -> Result<(), PdeError> {
        if u.len() != self.grid.len() {
            return Err(PdeError::ShapeMismatch {
                expected: self.grid.len(),
                got: u.len(),
            });
        }
        Ok(())
    }

    fn uses_origin_rule(&self) -> bool {
        self.origin_rule.is_some() && matches!(self.left, BoundaryCondition::SymmetryNeumann)
    }

    /// Solves the oblique relation for the boundary slope.
    pub fn boundary_slope(&self, side: Side, u: f64, t: f64) -> Result<f64, PdeError> {
        let bc = match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        };
        let BoundaryCondition::ObliqueNonlinear { residual, chi } = bc else {
            return Err(PdeError::InvalidConfig(format!("{side} boundary is not oblique")));
        };
        let r = |p: f64| residual(u, p, t);
        // One Newton step with the obliqueness bound gives a cheap first guess.
        let r0 = r(0.0);
        let guess = if r0.is_finite() { -r0 / chi.max(1e-300) } else { 0.0 };
        let guess = if r(guess).is_finite() { guess } else { 0.0 };
        solve_monotone(r, guess, GHOST_TOL, GHOST_SLOPE_LIMIT)
            .filter(|root| root.residual.abs() <= GHOST_TOL)
            .map(|root| root.x)
            .ok_or(PdeError::BoundaryRootFailure { side, t, u })
    }

    /// Ghost value beyond the boundary node.
    pub fn ghost(&self, side: Side, u: &[f64], t: f64) -> Result<f64, PdeError> {
        let n = u.len() - 1;
        let h = self.grid.h();
        let (bc, inner) = match side {
            Side::Left => (&self.left, u[1]),
            Side::Right => (&self.right, u[n - 1]),
        };
        match bc {
            BoundaryCondition::SymmetryNeumann => Ok(inner),
            BoundaryCondition::ObliqueNonlinear { .. } => {
                let boundary = match side {
                    Side::Left => u[0],
                    Side::Right => u[n],
                };
                let p = self.boundary_slope(side, boundary, t)?;
                Ok(match side {
                    Side::Left => inner - 2.0 * h * p,
                    Side::Right => inner + 2.0 * h * p,
                })
            }
            _ => Err(PdeError::InvalidConfig(format!("{side} boundary has no ghost node"))),
        }
    }

    /// Value an algebraic boundary node must take given the interior.
    fn algebraic_value(&self, side: Side, u: &[f64], t: f64) -> Option<f64> {
        let n = u.len() - 1;
        let h = self.grid.h();
        let bc = match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        };
        match bc {
            BoundaryCondition::Dirichlet(g) => Some(g(t)),
            BoundaryCondition::OneSidedNeumann(q) => Some(match side {
                Side::Left => u[1] - h * q(t),
                Side::Right => u[n - 1] + h * q(t),
            }),
            _ => None,
        }
    }

    /// Overwrites algebraic boundary nodes with their constrained values.
    pub fn enforce_boundary(&self, u: &mut [f64], t: f64) {
        let n = u.len() - 1;
        if let Some(v) = self.algebraic_value(Side::Left, u, t) {
            u[0] = v;
        }
        if let Some(v) = self.algebraic_value(Side::Right, u, t) {
            u[n] = v;
        }
    }

    /// Semi-discrete right-hand side at every node.
    pub fn rhs(&self, u: &[f64], t: f64) -> Result<Vec<f64>, PdeError> {
        self.rhs_with(u, t, |_, _, _, _| {})
    }

    /// As [`Self::rhs`], reporting `(node, u_xx, value)` for each node whose
    /// value comes from a differential equation.
    fn rhs_with(&self, u: &[f64], t: f64, mut visit: impl FnMut(usize, f64, f64, f64)) -> Result<Vec<f64>, PdeError> {
        self.check_shape(u)?;
        let n = u.len() - 1;
        let h = self.grid.h();
        let inv_h2 = 1.0 / (h * h);
        let inv_2h = 0.5 / h;

        // Neighbour values seen by the stencils. Algebraic nodes are replaced
        // by their constrained values so stage states need no fixing.
        let left_value = self.algebraic_value(Side::Left, u, t).unwrap_or(u[0]);
        let right_value = self.algebraic_value(Side::Right, u, t).unwrap_or(u[n]);
        let at = |i: usize| -> f64 {
            if i == 0 {
                left_value
            } else if i == n {
                right_value
            } else {
                u[i]
            }
        };

        let mut out = vec![0.0; n + 1];
        for (i, slot) in out.iter_mut().enumerate().take(n).skip(1) {
            let (um, uc, up) = (at(i - 1), u[i], at(i + 1));
            let ux = (up - um) * inv_2h;
            let uxx = (up - 2.0 * uc + um) * inv_h2;
            let value = (self.interior_rhs)(self.grid.node(i), uc, ux, uxx, t);
            visit(i, ux, uxx, value);
            *slot = value;
        }

        for side in [Side::Left, Side::Right] {
            let (i, bc) = match side {
                Side::Left => (0, &self.left),
                Side::Right => (n, &self.right),
            };
            out[i] = match bc {
                BoundaryCondition::Dirichlet(g) => {
                    let dt = 1e-6 * t.abs().max(1.0);
                    (g(t + dt) - g(t - dt)) / (2.0 * dt)
                }
                BoundaryCondition::OneSidedNeumann(_) => 0.0,
                BoundaryCondition::SymmetryNeumann if side == Side::Left && self.uses_origin_rule() => {
                    let uxx = 2.0 * (u[1] - u[0]) * inv_h2;
                    let rule = self.origin_rule.as_ref().expect("checked above");
                    let value = rule(u[0], uxx, t);
                    visit(0, 0.0, uxx, value);
                    value
                }
                _ => {
                    let ghost = self.ghost(side, u, t)?;
                    let (um, up) = match side {
                        Side::Left => (ghost, at(1)),
                        Side::Right => (at(n - 1), ghost),
                    };
                    let ux = (up - um) * inv_2h;
                    let uxx = (up - 2.0 * u[i] + um) * inv_h2;
                    let value = (self.interior_rhs)(self.grid.node(i), u[i], ux, uxx, t);
                    visit(i, ux, uxx, value);
                    value
                }
            };
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(PdeError::NonFinite { t });
        }
        Ok(out)
    }

    /// Diffusion coefficient `∂F/∂u_xx` at every differential node, by
    /// forward differencing. For the origin node the coefficient of the
    /// regularised rule is reported.
    pub fn diffusion_coefficients(&self, u: &[f64], t: f64) -> Result<Vec<(usize, f64)>, PdeError> {
        let mut coeffs = Vec::with_capacity(u.len());
        let mut samples = Vec::with_capacity(u.len());
        self.rhs_with(u, t, |i, ux, uxx, value| samples.push((i, ux, uxx, value)))?;
        for (i, ux, uxx, value) in samples {
            let delta = 1e-6 * uxx.abs().max(1.0);
            let bumped = if i == 0 && self.uses_origin_rule() {
                (self.origin_rule.as_ref().expect("origin rule"))(u[0], uxx + delta, t)
            } else {
                (self.interior_rhs)(self.grid.node(i), u[i], ux, uxx + delta, t)
            };
            coeffs.push((i, (bumped - value) / delta));
        }
        Ok(coeffs)
    }

    /// Fails with [`PdeError::NonParabolic`] unless every diffusion
    /// coefficient is positive; returns the largest.
    pub fn check_parabolic(&self, u: &[f64], t: f64) -> Result<f64, PdeError> {
        let mut max: f64 = 0.0;
        for (i, d) in self.diffusion_coefficients(u, t)? {
            if !(d > 0.0) {
                return Err(PdeError::NonParabolic {
                    x: self.grid.node(i),
                    coefficient: d,
                });
            }
            max = max.max(d);
        }
        Ok(max)
    }

    /// Tridiagonal Jacobian of [`Self::rhs`] by finite differences with
    /// three interleaved perturbation colours.
    pub fn jacobian(&self, u: &[f64], t: f64, f0: &[f64]) -> Result<Tridiagonal, PdeError> {
        let len = u.len();
        let mut jac = Tridiagonal::zeros(len);
        let mut shifted = u.to_vec();
        for colour in 0..3 {
            let mut deltas = vec![0.0; len];
            for j in (colour..len).step_by(3) {
                let d = f64::EPSILON.sqrt() * u[j].abs().max(1.0);
                deltas[j] = d;
                shifted[j] = u[j] + d;
            }
            let f1 = self.rhs(&shifted, t)?;
            for j in (colour..len).step_by(3) {
                let d = deltas[j];
                shifted[j] = u[j];
                if j > 0 {
                    jac.upper[j - 1] = (f1[j - 1] - f0[j - 1]) / d;
                }
                jac.diag[j] = (f1[j] - f0[j]) / d;
                if j + 1 < len {
                    jac.lower[j + 1] = (f1[j + 1] - f0[j + 1]) / d;
                }
            }
        }
        Ok(jac)
    }
}

/// Time integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Classical fourth-order Runge–Kutta under a diffusive step limit.
    ExplicitRK4,
    /// Linearly implicit Euler, `(I - dt J) Δ = dt F`.
    SemiImplicitEuler,
    /// Two-stage second-order Rosenbrock method with `γ = 1 + 1/√2`.
    #[default]
    Rosenbrock2,
}

impl Scheme {
    pub fn is_implicit(self) -> bool {
        !matches!(self, Self::ExplicitRK4)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub scheme: Scheme,
    /// Explicit: `dt ≤ cfl_safety·h²/(2 D_max)`. Implicit: `dt ≤ cfl_safety·h`.
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub steady_tol: f64,
    pub max_steps: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::default(),
            cfl_safety: 0.2,
            dt_max: 1e-2,
            dt_min: 1e-14,
            steady_tol: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<(), PdeError> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(PdeError::InvalidConfig(format!(
                "cfl_safety = {} outside (0, 1]",
                self.cfl_safety
            )));
        }
        if !(self.dt_min > 0.0 && self.dt_max >= self.dt_min) {
            return Err(PdeError::InvalidConfig("need 0 < dt_min ≤ dt_max".into()));
        }
        if !(self.steady_tol > 0.0) {
            return Err(PdeError::InvalidConfig("steady_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Grid values at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn new(u: Vec<f64>, t: f64) -> Self {
        Self { u, t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Until {
    FinalTime(f64),
    /// Stop once `sup |F| < tol`, or fail after `t_max`.
    Steady {
        tol: f64,
        t_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    FinalTime,
    Steady,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FinalTime => "FinalTime",
            Self::Steady => "Steady",
        })
    }
}

/// What a run hook is being shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Initial,
    Step,
    /// A requested output time was reached.
    Output,
    Final,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub outputs: Vec<FieldState>,
    pub final_state: FieldState,
    pub termination: Termination,
    pub steps: usize,
    /// `sup |F|` at the final state.
    pub final_residual: f64,
}

/// Binds a problem to a stepper configuration.
#[derive(Debug, Clone)]
pub struct Solver {
    pub problem: ParabolicProblem,
    pub config: StepperConfig,
}

impl Solver {
    pub fn new(problem: ParabolicProblem, config: StepperConfig) -> Result<Self, PdeError> {
        config.validate()?;
        Ok(Self { problem, config })
    }

    fn time_scale(&self, t: f64) -> f64 {
        self.problem.time_scale.as_ref().map_or(1.0, |s| s(t))
    }

    /// Step size bound at `state`.
    pub fn stable_dt(&self, state: &FieldState) -> Result<f64, PdeError> {
        let h = self.problem.grid.h();
        let dt = if self.config.scheme.is_implicit() {
            self.config.cfl_safety * h * self.time_scale(state.t)
        } else {
            let d_max = self.problem.check_parabolic(&state.u, state.t)?;
            self.config.cfl_safety * h * h / (2.0 * d_max)
        };
        Ok(dt.min(self.config.dt_max))
    }

    /// Sup-norm of the semi-discrete right-hand side.
    pub fn residual(&self, state: &FieldState) -> Result<f64, PdeError> {
        Ok(sup_norm(&self.problem.rhs(&state.u, state.t)?))
    }

    /// Advances by exactly `dt`.
    pub fn step(&self, state: &FieldState, dt: f64) -> Result<FieldState, PdeError> {
        let f0 = self.problem.rhs(&state.u, state.t)?;
        self.step_from(state, &f0, dt)
    }

    fn step_from(&self, state: &FieldState, f0: &[f64], dt: f64) -> Result<FieldState, PdeError> {
        let p = &self.problem;
        let t = state.t;
        let u = &state.u;
        let axpy = |a: f64, x: &[f64]| -> Vec<f64> { u.iter().zip(x).map(|(ui, xi)| ui + a * xi).collect() };
        let singular = || PdeError::StiffnessFailure { t, dt };
        let mut next = match self.config.scheme {
            Scheme::ExplicitRK4 => {
                let k1 = f0;
                let k2 = p.rhs(&axpy(0.5 * dt, k1), t + 0.5 * dt)?;
                let k3 = p.rhs(&axpy(0.5 * dt, &k2), t + 0.5 * dt)?;
                let k4 = p.rhs(&axpy(dt, &k3), t + dt)?;
                (0..u.len())
                    .map(|i| u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect()
            }
            Scheme::SemiImplicitEuler => {
                let jac = p.jacobian(u, t, f0)?;
                let rhs: Vec<f64> = f0.iter().map(|f| dt * f).collect();
                let delta = jac.shifted_identity(dt).solve(&rhs).ok_or_else(singular)?;
                u.iter().zip(&delta).map(|(a, b)| a + b).collect()
            }
            Scheme::Rosenbrock2 => {
                let gamma = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
                let jac = p.jacobian(u, t, f0)?;
                let w = jac.shifted_identity(gamma * dt);
                // Time enters as an extra unknown with unit speed, so the
                // stages carry ±γ·dt·∂F/∂t. Dropping it costs an order near
                // time-dependent boundary data.
                let delta = 1e-7 * t.abs().max(1.0);
                let ft: Vec<f64> = p
                    .rhs(u, t + delta)?
                    .iter()
                    .zip(f0)
                    .map(|(a, b)| (a - b) / delta)
                    .collect();
                let rhs1: Vec<f64> = f0.iter().zip(&ft).map(|(f, d)| f + gamma * dt * d).collect();
                let k1 = w.solve(&rhs1).ok_or_else(singular)?;
                let f1 = p.rhs(&axpy(dt, &k1), t + dt)?;
                let rhs2: Vec<f64> = f1
                    .iter()
                    .zip(&k1)
                    .zip(&ft)
                    .map(|((f, k), d)| f - 2.0 * k - gamma * dt * d)
                    .collect();
                let k2 = w.solve(&rhs2).ok_or_else(singular)?;
                (0..u.len())
                    .map(|i| u[i] + dt * (1.5 * k1[i] + 0.5 * k2[i]))
                    .collect::<Vec<f64>>()
            }
        };
        p.enforce_boundary(&mut next, t + dt);
        if next.iter().any(|v: &f64| !v.is_finite()) {
            return Err(PdeError::NonFinite { t: t + dt });
        }
        Ok(FieldState::new(next, t + dt))
    }

    /// Integrates from `state` until `until`, stopping exactly at each
    /// `output_times` entry. `hook` sees every accepted state and may abort
    /// the run with its own error.
    pub fn run<E: From<PdeError>>(
        &self,
        state: FieldState,
        until: Until,
        output_times: &[f64],
        mut hook: impl FnMut(&FieldState, Event) -> Result<(), E>,
    ) -> Result<Trajectory, E> {
        let p = &self.problem;
        p.check_shape(&state.u)?;
        p.check_parabolic(&state.u, state.t)?;
        let mut state = state;
        p.enforce_boundary(&mut state.u, state.t);
        hook(&state, Event::Initial)?;

        let t_end = match until {
            Until::FinalTime(t) => t,
            Until::Steady { t_max, .. } => t_max,
        };
        let mut pending: Vec<f64> = output_times
            .iter()
            .copied()
            .filter(|&t| t >= state.t && t <= t_end)
            .collect();
        pending.sort_by(f64::total_cmp);
        pending.dedup();
        let mut outputs = Vec::new();
        let mut pending = pending.into_iter().peekable();
        while let Some(&t) = pending.peek() {
            if t > state.t {
                break;
            }
            outputs.push(state.clone());
            hook(&state, Event::Output)?;
            pending.next();
        }

        let mut steps = 0;
        let mut dt_shrink = 1.0;
        loop {
            let f0 = p.rhs(&state.u, state.t)?;
            let residual = sup_norm(&f0);
            if let Until::Steady { tol, .. } = until {
                if residual < tol {
                    hook(&state, Event::Final)?;
                    return Ok(Trajectory {
                        outputs,
                        final_state: state,
                        termination: Termination::Steady,
                        steps,
                        final_residual: residual,
                    });
                }
            }
            if state.t >= t_end - 1e-12 * t_end.abs().max(1.0) {
                if let Until::Steady { .. } = until {
                    return Err(PdeError::MaxStepsExceeded(steps).into());
                }
                hook(&state, Event::Final)?;
                return Ok(Trajectory {
                    outputs,
                    final_state: state,
                    termination: Termination::FinalTime,
                    steps,
                    final_residual: residual,
                });
            }
            if steps >= self.config.max_steps {
                return Err(PdeError::MaxStepsExceeded(steps).into());
            }

            let target = pending.peek().copied().unwrap_or(t_end).min(t_end);
            let mut dt = self.stable_dt(&state)? * dt_shrink;
            let mut hits_target = false;
            if state.t + dt >= target - 1e-12 * dt {
                dt = target - state.t;
                hits_target = true;
            } else if state.t + 2.0 * dt > target {
                // Split the remainder evenly instead of leaving a sliver.
                dt = 0.5 * (target - state.t);
            }
            match self.step_from(&state, &f0, dt) {
                Ok(mut next) => {
                    if hits_target {
                        next.t = target;
                    }
                    state = next;
                    steps += 1;
                    dt_shrink = (dt_shrink * 2.0).min(1.0);
                }
                Err(
                    PdeError::NonFinite { .. }
                    | PdeError::BoundaryRootFailure { .. }
                    | PdeError::StiffnessFailure { .. },
                ) if dt * 0.5 >= self.config.dt_min => {
                    dt_shrink *= 0.5;
                    continue;
                }
                Err(PdeError::NonFinite { .. } | PdeError::StiffnessFailure { .. }) => {
                    return Err(PdeError::StiffnessFailure { t: state.t, dt }.into());
                }
                Err(e) => return Err(e.into()),
            }
            hook(&state, Event::Step)?;
            while let Some(&t) = pending.peek() {
                if t > state.t {
                    break;
                }
                outputs.push(state.clone());
                hook(&state, Event::Output)?;
                pending.next();
            }
        }
    }
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn heat(n: usize) -> ParabolicProblem {
        let zero: TimeFn = Arc::new(|_| 0.0);
        ParabolicProblem::new(
            Grid1D::new(0.0, 1.0, n).unwrap(),
            Arc::new(|_, _, _, uxx, _| uxx),
            BoundaryCondition::Dirichlet(zero.clone()),
            BoundaryCondition::Dirichlet(zero),
        )
    }

    fn rk4() -> StepperConfig {
        StepperConfig {
            scheme: Scheme::ExplicitRK4,
            ..StepperConfig::default()
        }
    }

    fn sine(grid: &Grid1D) -> Vec<f64> {
        grid.nodes().iter().map(|x| (PI * x).sin()).collect()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(0.0, 1.0, 7).is_err());
        let g = Grid1D::new(0.0, 2.0, 8).unwrap();
        assert_eq!(g.node(8), 2.0);
        assert!(Grid1D::from_nodes(&g.nodes()).is_ok());
        let mut bad = g.nodes();
        bad[3] += 1e-6;
        assert!(Grid1D::from_nodes(&bad).is_err());
    }

    #[test]
    fn single_rk4_heat_step() {
        let p = heat(200);
        let grid = p.grid.clone();
        let solver = Solver::new(p, rk4()).unwrap();
        let dt = 1e-5;
        let next = solver.step(&FieldState::new(sine(&grid), 0.0), dt).unwrap();
        // The step integrates the semi-discrete system, whose sine mode decays
        // with the discrete eigenvalue 4 sin²(πh/2)/h².
        let h = grid.h();
        let lambda_h = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let discrete = grid
            .nodes()
            .iter()
            .zip(&next.u)
            .map(|(x, u)| (u - (-lambda_h * dt).exp() * (PI * x).sin()).abs())
            .fold(0.0, f64::max);
        assert!(discrete < 1e-9, "{discrete:e}");
        // Against the continuous solution the gap is the spatial error
        // (π² - λ_h)·dt ≈ π⁴h²dt/12.
        let continuous = grid
            .nodes()
            .iter()
            .zip(&next.u)
            .map(|(x, u)| (u - (-PI * PI * dt).exp() * (PI * x).sin()).abs())
            .fold(0.0, f64::max);
        let bound = PI.powi(4) * h * h * dt / 12.0;
        assert!(continuous < 1.01 * bound, "{continuous:e} vs {bound:e}");
    }

    #[test]
    fn zero_state_is_fixed() {
        let p = ParabolicProblem::new(
            Grid1D::new(0.0, 1.0, 16).unwrap(),
            Arc::new(|_, _, _, uxx, _| uxx),
            BoundaryCondition::SymmetryNeumann,
            BoundaryCondition::SymmetryNeumann,
        );
        for scheme in [Scheme::ExplicitRK4, Scheme::SemiImplicitEuler, Scheme::Rosenbrock2] {
            let solver = Solver::new(
                p.clone(),
                StepperConfig {
                    scheme,
                    ..Default::default()
                },
            )
            .unwrap();
            let next = solver.step(&FieldState::new(vec![0.0; 17], 0.0), 1e-3).unwrap();
            assert!(next.u.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn linear_oblique_ghost_is_exact() {
        // u_x + u = 0 at x = 1, so the ghost is u_{N-1} - 2h u_N.
        let p = ParabolicProblem::new(
            Grid1D::new(0.0, 1.0, 40).unwrap(),
            Arc::new(|_, _, _, uxx, _| uxx),
            BoundaryCondition::SymmetryNeumann,
            BoundaryCondition::ObliqueNonlinear {
                residual: Arc::new(|u, p, _| p + u),
                chi: 1.0,
            },
        );
        let u: Vec<f64> = p.grid.nodes().iter().map(|x| (1.3 * x).cos() + 0.2).collect();
        let h = p.grid.h();
        let ghost = p.ghost(Side::Right, &u, 0.0).unwrap();
        assert!((ghost - (u[39] - 2.0 * h * u[40])).abs() < 1e-12);
        let left = p.ghost(Side::Left, &u, 0.0).unwrap();
        assert_eq!(left, u[1]);
    }

    #[test]
    fn nonlinear_ghost_residual() {
        let residual: ResidualFn = Arc::new(|u: f64, p: f64, t: f64| p + 0.3 * p.powi(3) + (2.0 * u).tanh() - t);
        let p = ParabolicProblem::new(
            Grid1D::new(0.0, 1.0, 10).unwrap(),
            Arc::new(|_, _, _, uxx, _| uxx),
            BoundaryCondition::SymmetryNeumann,
            BoundaryCondition::ObliqueNonlinear {
                residual: residual.clone(),
                chi: 1.0,
            },
        );
        for (u, t) in [(0.0, 0.0), (1.5, -2.0), (-3.0, 40.0)] {
            let slope = p.boundary_slope(Side::Right, u, t).unwrap();
            assert!(residual(u, slope, t).abs() < 1e-12);
        }
    }

    #[test]
    fn root_failure_reported() {
        let p = ParabolicProblem::new(
            Grid1D::new(0.0, 1.0, 10).unwrap(),
            Arc::new(|_, _, _, uxx, _| uxx),
            BoundaryCondition::SymmetryNeumann,
            BoundaryCondition::ObliqueNonlinear {
                residual: Arc::new(|_, p, _| p * p + 1.0),
                chi: 1.0,
            },
        );
        assert!(matches!(
            p.rhs(&[0.0; 11], 0.0),
            Err(PdeError::BoundaryRootFailure { side: Side::Right, .. })
        ));
    }

    #[test]
    fn steady_heat() {
        let p = heat(20);
        let grid = p.grid.clone();
        let solver = Solver::new(p, rk4()).unwrap();
        let traj = solver
            .run::<PdeError>(
                FieldState::new(sine(&grid), 0.0),
                Until::Steady {
                    tol: 1e-8,
                    t_max: 100.0,
                },
                &[],
                |_, _| Ok(()),
            )
            .unwrap();
        assert_eq!(traj.termination, Termination::Steady);
        assert!(traj.final_residual < 1e-8);
        assert!(traj.final_state.u.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn steady_input_returns_immediately() {
        let p = heat(20);
        let solver = Solver::new(p, rk4()).unwrap();
        let traj = solver
            .run::<PdeError>(
                FieldState::new(vec![0.0; 21], 0.0),
                Until::Steady { tol: 1e-8, t_max: 1.0 },
                &[],
                |_, _| Ok(()),
            )
            .unwrap();
        assert_eq!(traj.steps, 0);
    }

    #[test]
    fn output_times_hit_exactly() {
        let p = heat(16);
        let grid = p.grid.clone();
        let solver = Solver::new(p, StepperConfig::default()).unwrap();
        let mut seen = Vec::new();
        let traj = solver
            .run::<PdeError>(
                FieldState::new(sine(&grid), 0.0),
                Until::FinalTime(0.1),
                &[0.0, 0.0123, 0.05, 0.1],
                |s, e| {
                    if e == Event::Output {
                        seen.push(s.t);
                    }
                    Ok(())
                },
            )
            .unwrap();
        assert_eq!(seen, vec![0.0, 0.0123, 0.05, 0.1]);
        assert_eq!(traj.outputs.len(), 4);
        assert_eq!(traj.final_state.t, 0.1);
    }

    #[test]
    fn non_parabolic_rejected() {
        let p = ParabolicProblem::new(
            Grid1D::new(0.0, 1.0, 16).unwrap(),
            Arc::new(|_, _, _, uxx, _| -uxx),
            BoundaryCondition::SymmetryNeumann,
            BoundaryCondition::SymmetryNeumann,
        );
        let solver = Solver::new(p, rk4()).unwrap();
        let err = solver
            .run::<PdeError>(
                FieldState::new(vec![1.0; 17], 0.0),
                Until::FinalTime(1.0),
                &[],
                |_, _| Ok(()),
            )
            .unwrap_err();
        assert!(matches!(err, PdeError::NonParabolic { .. }));
    }

    #[test]
    fn jacobian_matches_heat_stencil() {
        let p = ParabolicProblem::new(
            Grid1D::new(0.0, 1.0, 10).unwrap(),
            Arc::new(|_, _, _, uxx, _| uxx),
            BoundaryCondition::SymmetryNeumann,
            BoundaryCondition::SymmetryNeumann,
        );
        let u: Vec<f64> = p.grid.nodes().iter().map(|x| x * x).collect();
        let f0 = p.rhs(&u, 0.0).unwrap();
        let jac = p.jacobian(&u, 0.0, &f0).unwrap();
        let inv_h2 = 100.0;
        assert!((jac.upper[0] - 2.0 * inv_h2).abs() < 1e-4);
        assert!((jac.diag[5] + 2.0 * inv_h2).abs() < 1e-4);
        assert!((jac.lower[5] - inv_h2).abs() < 1e-4);
        assert!((jac.lower[10] - 2.0 * inv_h2).abs() < 1e-4);
    }

    #[test]
    fn schemes_agree_to_first_order() {
        let p = heat(32);
        let grid = p.grid.clone();
        let u0 = sine(&grid);
        let t_end = 0.05;
        let run = |scheme, dt_max: f64| {
            let solver = Solver::new(
                p.clone(),
                StepperConfig {
                    scheme,
                    dt_max,
                    ..Default::default()
                },
            )
            .unwrap();
            solver
                .run::<PdeError>(
                    FieldState::new(u0.clone(), 0.0),
                    Until::FinalTime(t_end),
                    &[],
                    |_, _| Ok(()),
                )
                .unwrap()
                .final_state
                .u
        };
        let reference = run(Scheme::ExplicitRK4, 1.0);
        let gap = |dt| {
            let v = run(Scheme::SemiImplicitEuler, dt);
            v.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (g1, g2) = (gap(1e-3), gap(5e-4));
        assert!(g1 < 1e-2);
        let ratio = g1 / g2;
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
        let gap_ros = |dt| {
            let v = run(Scheme::Rosenbrock2, dt);
            v.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (r1, r2) = (gap_ros(1e-3), gap_ros(5e-4));
        assert!(r1 < 0.1 * g1);
        let ratio = r1 / r2;
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }
}
