//! Manufactured-solution refinement ladders for the solver and both flows.
//!
//! Each problem pairs a smooth exact solution with the forcing that makes it
//! solve the discretised equation's continuous counterpart, boundary
//! relations included, so the final-time error measures discretisation only.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::clifford::{clifford_boundary_relation, clifford_origin_rule, clifford_rescaled_rhs};
use crate::flow::FlowError;
use crate::lawlor::{lawlor_boundary_relation, lawlor_origin_rule, lawlor_problem, lawlor_rhs};
use crate::pde::{
    observed_order, BoundaryCondition, FieldState, Grid1D, ParabolicProblem, PdeError, Side, Solver, StepperConfig,
    Until, GHOST_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderProblem {
    /// `u_t = u″` with a symmetry node at 0 and Dirichlet data at 1.
    Heat,
    /// The same with the first-order one-sided flux condition at 0: the
    /// negative control.
    HeatOneSided,
    /// Forced Lawlor equation with its origin rule and oblique condition.
    Lawlor,
    /// Forced rescaled Clifford equation with its origin rule and oblique
    /// condition.
    Clifford,
}

impl LadderProblem {
    pub const ALL: [LadderProblem; 4] = [Self::Heat, Self::HeatOneSided, Self::Lawlor, Self::Clifford];

    pub fn name(self) -> &'static str {
        match self {
            Self::Heat => "heat",
            Self::HeatOneSided => "heat-one-sided",
            Self::Lawlor => "lawlor",
            Self::Clifford => "clifford",
        }
    }

    /// Order the ladder should show.
    pub fn expected_order(self) -> f64 {
        match self {
            Self::HeatOneSided => 1.0,
            _ => 2.0,
        }
    }
}

impl fmt::Display for LadderProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LadderProblem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown problem '{s}' (expected heat, heat-one-sided, lawlor or clifford)"))
    }
}

/// Exact solution with its derivatives `(u, u_t, u_x, u_xx)`.
type Exact = Arc<dyn Fn(f64, f64) -> [f64; 4] + Send + Sync>;

/// Boundary angle used by the forced flow problems.
const LADDER_ALPHA: f64 = 0.3;

fn exact_solution(kind: LadderProblem) -> Exact {
    match kind {
        LadderProblem::Heat | LadderProblem::HeatOneSided => Arc::new(|x, t| {
            let e = (-t).exp();
            [e * x.cos(), -e * x.cos(), -e * x.sin(), -e * x.cos()]
        }),
        LadderProblem::Lawlor => Arc::new(|s, t| {
            // v = -0.2 + 0.3 e^{-t} cos(2s)
            let a = 0.3 * (-t).exp();
            let c = (2.0 * s).cos();
            [-0.2 + a * c, -a * c, -2.0 * a * (2.0 * s).sin(), -4.0 * a * c]
        }),
        LadderProblem::Clifford => Arc::new(|r, t| {
            // φ = 0.1 + 0.25 e^{-t} cos(r) + 0.05 r²
            let a = 0.25 * (-t).exp();
            [
                0.1 + a * r.cos() + 0.05 * r * r,
                -a * r.cos(),
                -a * r.sin() + 0.1 * r,
                -a * r.cos() + 0.1,
            ]
        }),
    }
}

/// Interval and semi-discrete problem on `n` intervals, with the exact
/// solution for comparison.
pub fn manufactured_problem(kind: LadderProblem, n: usize) -> Result<(ParabolicProblem, Exact), PdeError> {
    let exact = exact_solution(kind);
    let problem = match kind {
        LadderProblem::Heat | LadderProblem::HeatOneSided => {
            let grid = Grid1D::new(0.0, 1.0, n)?;
            let left = if kind == LadderProblem::Heat {
                BoundaryCondition::SymmetryNeumann
            } else {
                BoundaryCondition::OneSidedNeumann(Arc::new(|_| 0.0))
            };
            let ex = exact.clone();
            ParabolicProblem::new(
                grid,
                Arc::new(|_, _, _, uxx, _| uxx),
                left,
                BoundaryCondition::Dirichlet(Arc::new(move |t| ex(1.0, t)[0])),
            )
        }
        LadderProblem::Lawlor => {
            let grid = Grid1D::new(0.0, 1.0, n)?;
            let (e1, e2, e3) = (exact.clone(), exact.clone(), exact.clone());
            ParabolicProblem::new(
                grid,
                Arc::new(move |s, v, vp, vpp, t| {
                    let [u, ut, ux, uxx] = e1(s, t);
                    let forcing = ut - lawlor_rhs(s, u, ux, uxx).unwrap_or(f64::NAN);
                    lawlor_rhs(s, v, vp, vpp).unwrap_or(f64::NAN) + forcing
                }),
                BoundaryCondition::SymmetryNeumann,
                BoundaryCondition::ObliqueNonlinear {
                    residual: Arc::new(move |v, vp, t| {
                        let [u, _, ux, _] = e2(1.0, t);
                        lawlor_boundary_relation(v, vp, LADDER_ALPHA) - lawlor_boundary_relation(u, ux, LADDER_ALPHA)
                    }),
                    chi: 1.0,
                },
            )
            .with_origin_rule(Arc::new(move |v, vpp, t| {
                let [u, ut, _, uxx] = e3(0.0, t);
                lawlor_origin_rule(v, vpp) + ut - lawlor_origin_rule(u, uxx)
            }))
        }
        LadderProblem::Clifford => {
            let grid = Grid1D::new(0.0, 2.0, n)?;
            let (e1, e2, e3) = (exact.clone(), exact.clone(), exact.clone());
            ParabolicProblem::new(
                grid,
                Arc::new(move |r, p, pp, ppp, t| {
                    let [u, ut, ux, uxx] = e1(r, t);
                    clifford_rescaled_rhs(r, p, pp, ppp) + ut - clifford_rescaled_rhs(r, u, ux, uxx)
                }),
                BoundaryCondition::SymmetryNeumann,
                BoundaryCondition::ObliqueNonlinear {
                    residual: Arc::new(move |p, pp, t| {
                        let [u, _, ux, _] = e2(2.0, t);
                        clifford_boundary_relation(p, pp, LADDER_ALPHA)
                            - clifford_boundary_relation(u, ux, LADDER_ALPHA)
                    }),
                    chi: 1.0,
                },
            )
            .with_origin_rule(Arc::new(move |p, ppp, t| {
                let [u, ut, _, uxx] = e3(0.0, t);
                clifford_origin_rule(p, ppp) + ut - clifford_origin_rule(u, uxx)
            }))
        }
    };
    Ok((problem, exact))
}

/// Final time of every ladder run.
pub const LADDER_T_FINAL: f64 = 0.5;

/// Sup-norm error at [`LADDER_T_FINAL`] on `n` intervals.
pub fn ladder_error(kind: LadderProblem, n: usize, stepper: &StepperConfig) -> Result<f64, PdeError> {
    let (problem, exact) = manufactured_problem(kind, n)?;
    let nodes = problem.grid.nodes();
    let u0: Vec<f64> = nodes.iter().map(|x| exact(*x, 0.0)[0]).collect();
    let solver = Solver::new(problem, stepper.clone())?;
    let traj = solver.run::<PdeError>(
        FieldState::new(u0, 0.0),
        Until::FinalTime(LADDER_T_FINAL),
        &[],
        |_, _| Ok(()),
    )?;
    Ok(nodes
        .iter()
        .zip(&traj.final_state.u)
        .map(|(x, u)| (u - exact(*x, LADDER_T_FINAL)[0]).abs())
        .fold(0.0, f64::max))
}

/// Errors and observed orders along a doubling ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderReport {
    pub problem: LadderProblem,
    pub ns: Vec<usize>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

impl LadderReport {
    /// Whether every observed order lies within `tol` of the expected one.
    pub fn within(&self, tol: f64) -> bool {
        let p = self.problem.expected_order();
        !self.orders.is_empty() && self.orders.iter().all(|o| (o - p).abs() <= tol)
    }
}

pub fn run_ladder(kind: LadderProblem, ns: &[usize], stepper: &StepperConfig) -> Result<LadderReport, PdeError> {
    let mut errors = Vec::with_capacity(ns.len());
    let orders = observed_order(ns, |n| {
        let e = ladder_error(kind, n, stepper)?;
        errors.push(e);
        Ok(e)
    })?;
    Ok(LadderReport {
        problem: kind,
        ns: ns.to_vec(),
        errors,
        orders,
    })
}

/// Largest residual `|R(u_N, (u_ghost - u_{N-1})/2h)|` of the Lawlor
/// boundary relation over every accepted step of a run from `v0`.
pub fn lawlor_ghost_residual(alpha: f64, v0: Vec<f64>, t_final: f64) -> Result<f64, FlowError> {
    let n = v0.len() - 1;
    let problem = lawlor_problem(alpha, n)?;
    let h = problem.grid.h();
    let solver = Solver::new(problem.clone(), StepperConfig::default())?;
    let mut worst: f64 = 0.0;
    solver.run::<FlowError>(FieldState::new(v0, 0.0), Until::FinalTime(t_final), &[], |fs, _| {
        let ghost = problem.ghost(Side::Right, &fs.u, fs.t)?;
        let slope = (ghost - fs.u[n - 1]) / (2.0 * h);
        worst = worst.max(lawlor_boundary_relation(fs.u[n], slope, alpha).abs());
        Ok(())
    })?;
    Ok(worst)
}

/// Tolerance the ghost solve is expected to meet.
pub const GHOST_RESIDUAL_TOL: f64 = GHOST_TOL;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in LadderProblem::ALL {
            assert_eq!(p.name().parse::<LadderProblem>().unwrap(), p);
        }
        assert!("wave".parse::<LadderProblem>().is_err());
    }

    #[test]
    fn exact_solutions_are_consistent() {
        // Finite-difference check of the hand-written derivatives.
        for kind in LadderProblem::ALL {
            let e = exact_solution(kind);
            let (x, t, d) = (0.37, 0.2, 1e-5);
            let [_, ut, ux, uxx] = e(x, t);
            let fd_t = (e(x, t + d)[0] - e(x, t - d)[0]) / (2.0 * d);
            let fd_x = (e(x + d, t)[0] - e(x - d, t)[0]) / (2.0 * d);
            let fd_xx = (e(x + d, t)[0] - 2.0 * e(x, t)[0] + e(x - d, t)[0]) / (d * d);
            assert!((ut - fd_t).abs() < 1e-8, "{kind}");
            assert!((ux - fd_x).abs() < 1e-8, "{kind}");
            assert!((uxx - fd_xx).abs() < 1e-4, "{kind}");
            assert_eq!(e(0.0, t)[2], 0.0, "{kind} must be even");
        }
    }

    #[test]
    fn exact_solutions_satisfy_forced_problems() {
        for kind in [LadderProblem::Heat, LadderProblem::Lawlor, LadderProblem::Clifford] {
            let (problem, exact) = manufactured_problem(kind, 64).unwrap();
            let (_, b) = problem.grid.bounds();
            let [u, _, ux, _] = exact(b, 0.3);
            if let BoundaryCondition::ObliqueNonlinear { residual, .. } = &problem.right {
                assert!(residual(u, ux, 0.3).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn heat_ladder_is_second_order() {
        let r = run_ladder(LadderProblem::Heat, &[40, 80, 160], &StepperConfig::default()).unwrap();
        assert!(r.within(0.1), "{r:?}");
    }

    #[test]
    fn one_sided_control_is_first_order() {
        let r = run_ladder(LadderProblem::HeatOneSided, &[40, 80, 160], &StepperConfig::default()).unwrap();
        assert!(r.within(0.1), "{r:?}");
    }

    #[test]
    fn flow_ladders_are_second_order() {
        for kind in [LadderProblem::Lawlor, LadderProblem::Clifford] {
            let r = run_ladder(kind, &[40, 80, 160], &StepperConfig::default()).unwrap();
            assert!(r.within(0.1), "{r:?}");
        }
    }

    #[test]
    fn ladder_must_double() {
        assert!(matches!(
            run_ladder(LadderProblem::Heat, &[20, 30], &StepperConfig::default()),
            Err(PdeError::OrderUndetermined(_))
        ));
    }

    #[test]
    fn ghost_residual_is_tiny() {
        let v0: Vec<f64> = (0..=50).map(|i| 0.1 * (i as f64 / 50.0).powi(2) - 0.3).collect();
        let r = lawlor_ghost_residual(0.8, v0, 0.05).unwrap();
        assert!(r < GHOST_RESIDUAL_TOL, "{r}");
    }
}
