//! Simulation and verification toolkit for equivariant Lagrangian mean
//! curvature flow with boundary in C².
//!
//! The surfaces studied here are `L = γ(s)·(cos ψ, sin ψ)` for a planar
//! profile curve `γ`, so every flow reduces to a scalar parabolic equation in
//! one space variable. Two boundary-value problems are provided: a disc whose
//! boundary slides on the Lawlor neck ([`lawlor`]) and a disc whose boundary
//! slides on the shrinking Clifford torus ([`clifford`]).

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clifford;
pub mod diagnostics;
pub mod experiments;
pub mod flow;
pub mod frame;
pub mod geometry;
pub mod io;
pub mod lawlor;
pub mod pde;
pub mod verification;

pub use geometry::{AngleField, GeometryError, PlanarPoint, ProfileCurve};
