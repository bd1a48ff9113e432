//! Planar profile curves of equivariant Lagrangians in C².
//!
//! An equivariant Lagrangian is the surface `L(s, ψ) = γ(s)·(cos ψ, sin ψ)`
//! swept out by a planar profile curve `γ(s) = x(s) + i y(s)`. Everything the
//! flows need about `L` (Lagrangian angle, curvatures, surface integrals) is
//! computed here from samples of `γ`.
//!
//! Normals follow the convention `ν = iγ′/|γ′|`, so a counterclockwise circle
//! has its normal pointing inward and positive curvature.

mod stencil;

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::io::fmt_sci;
use stencil::DerivativeStencils;

/// Relative size below which a sample counts as sitting on the origin.
pub const ORIGIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate tangent at sample {index} (|γ′| = {speed:e})")]
    DegenerateTangent { index: usize, speed: f64 },
    #[error("normal speed is undefined at the origin sample {index}")]
    OriginUndefined { index: usize },
    #[error("length mismatch: expected {expected} values, got {got}")]
    ShapeError { expected: usize, got: usize },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
}

/// A point of the complex plane, `x + i y`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, angle: f64) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn arg(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// `Im(conj(self)·other)`, the oriented area spanned by the two vectors.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Multiplication by `i`.
    pub fn rot90(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for PlanarPoint {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for PlanarPoint {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for PlanarPoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl Mul<f64> for PlanarPoint {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

/// Sampled profile curve `γ(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    params: Vec<f64>,
    points: Vec<PlanarPoint>,
    origin_index: Option<usize>,
}

impl ProfileCurve {
    pub fn new(params: Vec<f64>, points: Vec<PlanarPoint>, origin_index: Option<usize>) -> Result<Self, GeometryError> {
        if params.len() != points.len() {
            return Err(GeometryError::ShapeError {
                expected: params.len(),
                got: points.len(),
            });
        }
        if params.len() < 4 {
            return Err(GeometryError::InvalidCurve(format!(
                "need at least 4 samples, got {}",
                params.len()
            )));
        }
        if params.iter().any(|s| !s.is_finite()) || points.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::InvalidCurve("non-finite sample".into()));
        }
        if let Some(k) = params.windows(2).position(|w| w[1] <= w[0]) {
            return Err(GeometryError::InvalidCurve(format!(
                "parameters not strictly increasing at index {}",
                k + 1
            )));
        }
        if let Some(o) = origin_index {
            if o >= points.len() {
                return Err(GeometryError::InvalidCurve(format!("origin index {o} out of range")));
            }
            let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
            if points[o].norm() >= ORIGIN_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
                return Err(GeometryError::InvalidCurve(format!(
                    "origin sample {o} is not at the origin"
                )));
            }
        }
        Ok(Self {
            params,
            points,
            origin_index,
        })
    }

    /// Samples `f` on the given parameters. The origin index is detected
    /// automatically.
    pub fn from_fn(params: &[f64], f: impl Fn(f64) -> PlanarPoint) -> Result<Self, GeometryError> {
        let points: Vec<PlanarPoint> = params.iter().map(|&s| f(s)).collect();
        let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let origin = points
            .iter()
            .position(|p| p.norm() < ORIGIN_TOLERANCE * scale.max(f64::MIN_POSITIVE));
        Self::new(params.to_vec(), points, origin)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn points(&self) -> &[PlanarPoint] {
        &self.points
    }

    pub fn origin_index(&self) -> Option<usize> {
        self.origin_index
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// The same curve traversed backwards, with parameter `s ↦ -s`.
    pub fn reversed(&self) -> Self {
        let n = self.len();
        Self {
            params: self.params.iter().rev().map(|s| -s).collect(),
            points: self.points.iter().rev().copied().collect(),
            origin_index: self.origin_index.map(|o| n - 1 - o),
        }
    }

    /// The curve scaled about the origin by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            params: self.params.clone(),
            points: self.points.iter().map(|&p| p * factor).collect(),
            origin_index: self.origin_index,
        }
    }

    /// First and second parameter derivatives at every sample.
    pub fn derivatives(&self) -> (Vec<PlanarPoint>, Vec<PlanarPoint>) {
        let st = DerivativeStencils::new(&self.params);
        let d1 = (0..self.len()).map(|i| st.first(i, &self.points)).collect();
        let d2 = (0..self.len()).map(|i| st.second(i, &self.points)).collect();
        (d1, d2)
    }

    /// `|γ′|` at every sample, failing on a degenerate tangent.
    fn checked_tangents(&self) -> Result<(Vec<PlanarPoint>, Vec<PlanarPoint>), GeometryError> {
        let (d1, d2) = self.derivatives();
        let mean_speed = d1.iter().map(|d| d.norm()).sum::<f64>() / d1.len() as f64;
        let tol = 1e-10 * mean_speed.max(f64::MIN_POSITIVE);
        if let Some((index, d)) = d1.iter().enumerate().find(|(_, d)| d.norm() <= tol) {
            return Err(GeometryError::DegenerateTangent { index, speed: d.norm() });
        }
        Ok((d1, d2))
    }

    /// Samples sitting at the origin: the declared one, plus any within
    /// `ORIGIN_TOLERANCE` of it relative to the curve's extent.
    fn origin_mask(&self) -> Vec<bool> {
        let scale = self.points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let tol = ORIGIN_TOLERANCE * scale.max(f64::MIN_POSITIVE);
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| self.origin_index == Some(i) || p.norm() < tol)
            .collect()
    }

    /// Arc length between samples `from` and `to` along the polyline.
    pub fn arc_length_between(&self, from: usize, to: usize) -> f64 {
        let (lo, hi) = if from <= to { (from, to) } else { (to, from) };
        self.points[lo..=hi].windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// Lagrangian angle samples, unwrapped along the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleField {
    pub values: Vec<f64>,
    pub branch_continuous: bool,
}

impl AngleField {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Reduces an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Lagrangian angle `θ = (n-1) arg γ + arg γ′` of the equivariant Lagrangian
/// in Cⁿ, with the limit `θ = n arg γ′` at the origin.
pub fn lagrangian_angle(curve: &ProfileCurve, n: usize) -> Result<AngleField, GeometryError> {
    if n < 2 {
        return Err(GeometryError::InvalidCurve(format!("dimension n = {n} < 2")));
    }
    let (d1, _) = curve.checked_tangents()?;
    let k = (n - 1) as f64;
    // A curve through an interior origin is the double cover s ↦ -s of the
    // same surface; samples before the origin are measured against -γ so the
    // angle stays continuous across it.
    let interior_origin = curve.origin_index.filter(|&o| o > 0 && o + 1 < curve.len());
    let at_origin = curve.origin_mask();
    let raw: Vec<f64> = (0..curve.len())
        .map(|i| {
            if at_origin[i] {
                n as f64 * d1[i].arg()
            } else {
                let g = match interior_origin {
                    Some(o) if i < o => -curve.points[i],
                    _ => curve.points[i],
                };
                k * g.arg() + d1[i].arg()
            }
        })
        .collect();
    let mut values = Vec::with_capacity(raw.len());
    let mut prev = wrap_angle(raw[0]);
    values.push(prev);
    for &r in &raw[1..] {
        let next = prev + wrap_angle(r - prev);
        values.push(next);
        prev = next;
    }
    Ok(AngleField {
        values,
        branch_continuous: true,
    })
}

/// Signed curvature `κ = ⟨γ″, ν⟩ / |γ′|²` with `ν = iγ′/|γ′|`.
pub fn curvature(curve: &ProfileCurve) -> Result<Vec<f64>, GeometryError> {
    let (d1, d2) = curve.checked_tangents()?;
    Ok(d1
        .iter()
        .zip(&d2)
        .map(|(a, b)| a.cross(*b) / a.norm().powi(3))
        .collect())
}

/// `⟨γ, ν⟩ / |γ|²` at each sample away from the origin: the normal
/// component of the rotational term of the equivariant flow.
pub fn rotational_curvature(curve: &ProfileCurve) -> Result<Vec<Option<f64>>, GeometryError> {
    let (d1, _) = curve.checked_tangents()?;
    let at_origin = curve.origin_mask();
    Ok((0..curve.len())
        .map(|i| {
            if at_origin[i] {
                None
            } else {
                let g = curve.points[i];
                let nu = d1[i].rot90() * (1.0 / d1[i].norm());
                Some(g.dot(nu) / g.norm_sq())
            }
        })
        .collect())
}

/// Scalar normal speed `⟨k - γ^⊥/|γ|², ν⟩` of the equivariant flow.
///
/// The rotational term is `0/0` at the origin; callers that need a value
/// there supply their own symmetric limit.
pub fn equivariant_normal_speed(curve: &ProfileCurve) -> Result<Vec<f64>, GeometryError> {
    if let Some(index) = curve.origin_mask().iter().position(|&o| o) {
        return Err(GeometryError::OriginUndefined { index });
    }
    let kappa = curvature(curve)?;
    let rot = rotational_curvature(curve)?;
    Ok(kappa
        .iter()
        .zip(rot)
        .map(|(k, r)| k - r.expect("origin excluded above"))
        .collect())
}

/// Lawlor neck profile `(cosh s, sinh s)`.
pub fn lawlor_profile(s_grid: &[f64]) -> Result<ProfileCurve, GeometryError> {
    ProfileCurve::from_fn(s_grid, |s| PlanarPoint::new(s.cosh(), s.sinh()))
}

/// Clifford torus profile `(2 cos s, 2 sin s)`.
pub fn clifford_profile(s_grid: &[f64]) -> Result<ProfileCurve, GeometryError> {
    ProfileCurve::from_fn(s_grid, |s| PlanarPoint::from_polar(2.0, s))
}

/// Integral of `f` over the revolved surface, `2π ∫ f |γ| |γ′| ds`, by the
/// trapezoidal rule in the curve parameter.
pub fn equivariant_integral(curve: &ProfileCurve, f: &[f64]) -> Result<f64, GeometryError> {
    if f.len() != curve.len() {
        return Err(GeometryError::ShapeError {
            expected: curve.len(),
            got: f.len(),
        });
    }
    let (d1, _) = curve.derivatives();
    let integrand: Vec<f64> = (0..curve.len())
        .map(|i| f[i] * curve.points[i].norm() * d1[i].norm())
        .collect();
    Ok(TAU * trapezoid(&curve.params, &integrand))
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Uniform grid of `n + 1` nodes on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / n as f64;
    (0..=n).map(|i| if i == n { b } else { a + i as f64 * h }).collect()
}

/// Writes the curve snapshot CSV (`s,x,y,theta,kappa`) for n = 2.
pub fn write_snapshot_csv<W: Write>(curve: &ProfileCurve, mut out: W) -> std::io::Result<()> {
    let to_io = |e: GeometryError| std::io::Error::new(std::io::ErrorKind::InvalidData, e);
    let theta = lagrangian_angle(curve, 2).map_err(to_io)?;
    let kappa = curvature(curve).map_err(to_io)?;
    writeln!(out, "s,x,y,theta,kappa")?;
    for i in 0..curve.len() {
        let p = curve.points[i];
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_sci(curve.params[i]),
            fmt_sci(p.x),
            fmt_sci(p.y),
            fmt_sci(theta.values[i]),
            fmt_sci(kappa[i])
        )?;
    }
    Ok(())
}
