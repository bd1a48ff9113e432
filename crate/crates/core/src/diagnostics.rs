//! Scalar functionals of flow snapshots: conserved integrals, Huisken-type
//! weighted areas, Gaussian densities, curvature suprema and the boundary
//! collar monitor.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

use crate::geometry::{
    curvature, equivariant_integral, lagrangian_angle, rotational_curvature, GeometryError, PlanarPoint, ProfileCurve,
};
use crate::io::fmt_sci;

/// Number of nodes of the periodic trapezoid rule over the rotation circle.
pub const PSI_NODES: usize = 64;
/// Below this arc length the boundary collar is considered collapsed.
pub const BOUNDARY_ARCLENGTH_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("kernel evaluated at t = {t}, not before its centre time {t0}")]
    DomainError { t: f64, t0: f64 },
    #[error("weight has {got} values, curve has {expected}")]
    ShapeError { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Scalar diagnostics at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t_or_tau: f64,
    pub area: f64,
    pub int_cos_theta: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    /// `sup |θ - 2φ|`; only defined for radial graphs.
    pub theta2phi_max: Option<f64>,
    pub sup_a2: f64,
    pub gaussian_density: f64,
    pub huisken_value: f64,
    pub min_boundary_arclength: f64,
}

impl DiagnosticsRecord {
    pub const HEADER: &'static str = "t_or_tau,area,int_cos_theta,theta_min,theta_max,theta2phi_max,sup_A2,gaussian_density,huisken_value,min_boundary_arclength";

    pub fn csv_row(&self) -> String {
        [
            self.t_or_tau,
            self.area,
            self.int_cos_theta,
            self.theta_min,
            self.theta_max,
            self.theta2phi_max.unwrap_or(f64::NAN),
            self.sup_a2,
            self.gaussian_density,
            self.huisken_value,
            self.min_boundary_arclength,
        ]
        .iter()
        .map(|v| fmt_sci(*v))
        .collect::<Vec<_>>()
        .join(",")
    }

    /// Checks that every present field is finite and the area positive.
    pub fn is_valid(&self) -> bool {
        let fields = [
            self.t_or_tau,
            self.area,
            self.int_cos_theta,
            self.theta_min,
            self.theta_max,
            self.theta2phi_max.unwrap_or(0.0),
            self.sup_a2,
            self.gaussian_density,
            self.huisken_value,
            self.min_boundary_arclength,
        ];
        fields.iter().all(|v| v.is_finite()) && self.area > 0.0
    }
}

/// Backward heat kernel centred at `(x0, t0)` in `C² = R⁴`, optionally
/// localised to the ball of radius `rho` about `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityKernel {
    /// `(Re z₁, Im z₁, Re z₂, Im z₂)`.
    pub center: [f64; 4],
    pub t0: f64,
    /// `None` is the global kernel.
    pub localization_radius: Option<f64>,
}

impl MonotonicityKernel {
    pub fn global(center: [f64; 4], t0: f64) -> Self {
        Self {
            center,
            t0,
            localization_radius: None,
        }
    }

    pub fn localized(center: [f64; 4], t0: f64, rho: f64) -> Self {
        Self {
            center,
            t0,
            localization_radius: Some(rho),
        }
    }

    fn is_origin_centred(&self) -> bool {
        self.center.iter().all(|c| *c == 0.0)
    }

    /// Kernel value at squared distance `d2` from the centre, `T = t0 - t`.
    fn value(&self, d2: f64, big_t: f64) -> f64 {
        let base = (-d2 / (4.0 * big_t)).exp() / (4.0 * PI * big_t);
        match self.localization_radius {
            None => base,
            Some(rho) => {
                let cut = cutoff(d2.sqrt() / rho);
                if cut == 0.0 {
                    0.0
                } else {
                    base * cut / plane_normalization(rho / big_t.sqrt())
                }
            }
        }
    }
}

/// Point of the revolved surface over profile point `p` at rotation `ψ`.
pub fn surface_point(p: PlanarPoint, psi: f64) -> [f64; 4] {
    let (s, c) = psi.sin_cos();
    [p.x * c, p.y * c, p.x * s, p.y * s]
}

/// `1` on `[0, 1/2]`, `0` beyond `1`, joined by a quintic with two vanishing
/// derivatives at both ends.
pub fn cutoff(u: f64) -> f64 {
    if u <= 0.5 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let z = (u - 0.5) / 0.5;
        1.0 - z * z * z * (10.0 - 15.0 * z + 6.0 * z * z)
    }
}

/// Integral of the localised kernel over a plane through its centre,
/// `∫₀^q (x/2) e^{-x²/4} χ(x/q) dx` with `q = ρ/√T`. Cached per `q`.
pub fn plane_normalization(q: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("cache poisoned").get(&q.to_bits()) {
        return *v;
    }
    let f = |x: f64| 0.5 * x * (-x * x / 4.0).exp() * cutoff(x / q);
    // The cutoff is smooth on each half, so split at its inner radius.
    let value = simpson(f, 0.0, 0.5 * q, 4000) + simpson(f, 0.5 * q, q, 4000);
    cache.lock().expect("cache poisoned").insert(q.to_bits(), value);
    value
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

/// `∫_L cos θ dH²`.
pub fn conserved_cos_theta(curve: &ProfileCurve, n: usize) -> Result<f64, DiagnosticsError> {
    let theta = lagrangian_angle(curve, n)?;
    let f: Vec<f64> = theta.values.iter().map(|t| t.cos()).collect();
    Ok(equivariant_integral(curve, &f)?)
}

/// Area of the revolved surface.
pub fn area(curve: &ProfileCurve) -> Result<f64, DiagnosticsError> {
    Ok(equivariant_integral(curve, &vec![1.0; curve.len()])?)
}

/// `∫_L f Φ dH²` for a snapshot at time `t`.
pub fn huisken_value(
    curve: &ProfileCurve,
    t: f64,
    kernel: &MonotonicityKernel,
    f: Option<&[f64]>,
) -> Result<f64, DiagnosticsError> {
    let big_t = kernel.t0 - t;
    if !(big_t > 0.0) {
        return Err(DiagnosticsError::DomainError { t, t0: kernel.t0 });
    }
    if let Some(f) = f {
        if f.len() != curve.len() {
            return Err(DiagnosticsError::ShapeError {
                expected: curve.len(),
                got: f.len(),
            });
        }
    }
    let weight = |i: usize| f.map_or(1.0, |f| f[i]);
    let integrand: Vec<f64> = curve
        .points()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let w = weight(i);
            if w == 0.0 {
                return 0.0;
            }
            let mean = if kernel.is_origin_centred() {
                kernel.value(p.norm_sq(), big_t)
            } else {
                (0..PSI_NODES)
                    .map(|k| {
                        let q = surface_point(p, TAU * k as f64 / PSI_NODES as f64);
                        let d2: f64 = q.iter().zip(&kernel.center).map(|(a, b)| (a - b).powi(2)).sum();
                        kernel.value(d2, big_t)
                    })
                    .sum::<f64>()
                    / PSI_NODES as f64
            };
            w * mean
        })
        .collect();
    Ok(equivariant_integral(curve, &integrand)?)
}

/// Localised Gaussian density `Θ^ρ(L, (x0, t0), r)`, evaluating the
/// snapshot as the slice at time `t0 - r²`.
pub fn gaussian_density(curve: &ProfileCurve, center: [f64; 4], r: f64, rho: f64) -> Result<f64, DiagnosticsError> {
    let kernel = MonotonicityKernel::localized(center, 0.0, rho);
    huisken_value(curve, -r * r, &kernel, None)
}

/// `sup |A|²` of the revolved Lagrangian, `κ² + 3λ²` with `λ = ⟨γ,ν⟩/|γ|²`.
///
/// At an origin sample of an odd profile `λ → κ/6`, giving `κ²(1 + 1/12)`.
pub fn sup_a2(curve: &ProfileCurve) -> Result<f64, DiagnosticsError> {
    Ok(a2_field(curve)?.into_iter().fold(0.0, f64::max))
}

/// Pointwise `|A|²`.
pub fn a2_field(curve: &ProfileCurve) -> Result<Vec<f64>, DiagnosticsError> {
    let kappa = curvature(curve)?;
    let rot = rotational_curvature(curve)?;
    Ok(kappa
        .iter()
        .zip(rot)
        .map(|(k, l)| match l {
            Some(l) => k * k + 3.0 * l * l,
            None => k * k * (1.0 + 1.0 / 12.0),
        })
        .collect())
}

/// Arc length from the origin sample to the boundary end of the profile.
/// Without an origin sample the sample closest to the origin is used.
pub fn boundary_arclength_proxy(curve: &ProfileCurve) -> f64 {
    let origin = curve.origin_index().unwrap_or_else(|| {
        curve
            .points()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    });
    let last = curve.len() - 1;
    let boundary = if origin <= last - origin { last } else { 0 };
    curve.arc_length_between(origin, boundary)
}

/// True when the boundary collar has collapsed below the threshold.
pub fn boundary_monitor_fires(proxy: f64) -> bool {
    proxy < BOUNDARY_ARCLENGTH_THRESHOLD
}
