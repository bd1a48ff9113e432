//! Property tests of geometric and flow invariants.

use std::f64::consts::PI;

use lmcf_core::clifford;
use lmcf_core::geometry::{curvature, equivariant_integral, lagrangian_angle, uniform_grid, wrap_angle};
use lmcf_core::lawlor;
use lmcf_core::{PlanarPoint, ProfileCurve};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn circle_curvature_is_reciprocal_radius(r in 0.2f64..5.0) {
        let c = ProfileCurve::from_fn(&uniform_grid(0.2, 2.5, 800), |s| PlanarPoint::from_polar(r, s)).unwrap();
        for k in curvature(&c).unwrap() {
            prop_assert!((k - 1.0 / r).abs() < 1e-4 / r);
        }
    }

    #[test]
    fn disc_area_is_exact(r in 0.1f64..10.0) {
        let c = ProfileCurve::from_fn(&uniform_grid(0.0, r, 50), |s| PlanarPoint::new(s, 0.0)).unwrap();
        let area = equivariant_integral(&c, &vec![1.0; c.len()]).unwrap();
        prop_assert!((area - PI * r * r).abs() < 1e-10 * r * r);
    }

    #[test]
    fn rotating_the_profile_shifts_the_angle(beta in -3.0f64..3.0, a in 0.1f64..0.9) {
        // A generic graph away from the origin, then the same graph rotated.
        let grid = uniform_grid(0.5, 1.5, 200);
        let f = |s: f64| PlanarPoint::new(s, a * s * s);
        let base = ProfileCurve::from_fn(&grid, f).unwrap();
        let (cb, sb) = (beta.cos(), beta.sin());
        let rotated = ProfileCurve::from_fn(&grid, |s| {
            let p = f(s);
            PlanarPoint::new(cb * p.x - sb * p.y, sb * p.x + cb * p.y)
        })
        .unwrap();
        let t0 = lagrangian_angle(&base, 2).unwrap().values;
        let t1 = lagrangian_angle(&rotated, 2).unwrap().values;
        for (x, y) in t0.iter().zip(&t1) {
            prop_assert!(wrap_angle(y - x - 2.0 * beta).abs() < 1e-9);
        }
    }

    #[test]
    fn lawlor_limit_is_a_discrete_fixed_point(alpha in -1.5f64..1.5, n in 8usize..600) {
        let v = (-alpha / 2.0).tan().atanh();
        prop_assert!(lawlor::discrete_residual(alpha, n, &vec![v; n + 1]).unwrap() < 1e-12);
    }

    #[test]
    fn clifford_constants_are_discrete_fixed_points(c in -3.0f64..3.0, n in 8usize..600) {
        prop_assert!(clifford::discrete_residual(0.0, n, &vec![c; n + 1]).unwrap() < 1e-12);
    }
}
