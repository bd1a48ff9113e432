//! Plain polyline plots of profile curves.

use std::fmt::Write;

use crate::geometry::{PlanarPoint, ProfileCurve};

/// Profile of the boundary manifold drawn behind the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryProfile {
    /// Both branches of `x² - y² = 1`.
    LawlorNeck,
    /// The circle of the given radius.
    Circle(f64),
}

const WIDTH: f64 = 600.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 0.1;

struct Viewport {
    x0: f64,
    y0: f64,
    scale: f64,
}

impl Viewport {
    /// Fits the points with 10% margin on each side, equal axis scales.
    fn fit(points: &[PlanarPoint]) -> Self {
        let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points.iter().filter(|p| p.is_finite()) {
            lo_x = lo_x.min(p.x);
            hi_x = hi_x.max(p.x);
            lo_y = lo_y.min(p.y);
            hi_y = hi_y.max(p.y);
        }
        if !lo_x.is_finite() {
            (lo_x, hi_x, lo_y, hi_y) = (-1.0, 1.0, -1.0, 1.0);
        }
        let span = (hi_x - lo_x).max(hi_y - lo_y).max(1e-9);
        let full = span * (1.0 + 2.0 * MARGIN);
        let (cx, cy) = (0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y));
        Self {
            x0: cx - 0.5 * full,
            y0: cy + 0.5 * full,
            scale: WIDTH.min(HEIGHT) / full,
        }
    }

    fn map(&self, p: PlanarPoint) -> (f64, f64) {
        ((p.x - self.x0) * self.scale, (self.y0 - p.y) * self.scale)
    }

    fn contains(&self, p: PlanarPoint) -> bool {
        let (x, y) = self.map(p);
        (-1.0..=WIDTH + 1.0).contains(&x) && (-1.0..=HEIGHT + 1.0).contains(&y)
    }
}

fn polyline(out: &mut String, view: &Viewport, points: &[PlanarPoint], style: &str) {
    // Split at points outside the viewport so the boundary profile is clipped.
    let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
    for &p in points {
        if view.contains(p) && p.is_finite() {
            runs.last_mut().expect("non-empty").push(view.map(p));
        } else if !runs.last().expect("non-empty").is_empty() {
            runs.push(Vec::new());
        }
    }
    for run in runs.into_iter().filter(|r| r.len() > 1) {
        let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
        let _ = writeln!(out, r#"  <polyline fill="none" {style} points="{}"/>"#, pts.join(" "));
    }
}

/// SVG document with the profile, its reflection through the origin and
/// the boundary manifold's profile.
pub fn render_profile_svg(curve: &ProfileCurve, boundary: BoundaryProfile, title: &str) -> String {
    let pts = curve.points();
    let reflected: Vec<PlanarPoint> = pts.iter().map(|p| -*p).collect();
    let mut all = pts.to_vec();
    all.extend(&reflected);
    let view = Viewport::fit(&all);

    let boundary_pts: Vec<Vec<PlanarPoint>> = match boundary {
        BoundaryProfile::LawlorNeck => {
            let branch = |sign: f64| {
                (0..=400)
                    .map(|k| {
                        let u = -4.0 + 8.0 * k as f64 / 400.0;
                        PlanarPoint::new(sign * u.cosh(), u.sinh())
                    })
                    .collect()
            };
            vec![branch(1.0), branch(-1.0)]
        }
        BoundaryProfile::Circle(r) => vec![(0..=400)
            .map(|k| PlanarPoint::from_polar(r, std::f64::consts::TAU * k as f64 / 400.0))
            .collect()],
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, "  <title>{}</title>", escape(title));
    let _ = writeln!(out, r#"  <rect width="100%" height="100%" fill="white"/>"#);
    for b in &boundary_pts {
        polyline(
            &mut out,
            &view,
            b,
            r##"stroke="#888888" stroke-width="1" stroke-dasharray="4 3""##,
        );
    }
    polyline(
        &mut out,
        &view,
        &reflected,
        r##"stroke="#1f77b4" stroke-width="1.5" stroke-opacity="0.5""##,
    );
    polyline(&mut out, &view, pts, r##"stroke="#1f77b4" stroke-width="2""##);
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::uniform_grid;

    #[test]
    fn draws_three_layers() {
        let curve = ProfileCurve::from_fn(&uniform_grid(0.0, 1.0, 50), |s| PlanarPoint::new(s, 0.1 * s)).unwrap();
        let svg = render_profile_svg(&curve, BoundaryProfile::LawlorNeck, "t = 0 <a&b>");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("t = 0 &lt;a&amp;b&gt;"));
        // Two hyperbola branches, reflection and profile.
        assert_eq!(svg.matches("<polyline").count(), 4);
        let circle = render_profile_svg(&curve, BoundaryProfile::Circle(1.0), "c");
        assert_eq!(circle.matches("<polyline").count(), 3);
    }

    #[test]
    fn viewport_has_margin() {
        let v = Viewport::fit(&[PlanarPoint::new(-1.0, -1.0), PlanarPoint::new(1.0, 1.0)]);
        let (x, y) = v.map(PlanarPoint::new(-1.0, 1.0));
        let pad = WIDTH * MARGIN / (1.0 + 2.0 * MARGIN);
        assert!((x - pad).abs() < 1e-9 && (y - pad).abs() < 1e-9);
    }
}
