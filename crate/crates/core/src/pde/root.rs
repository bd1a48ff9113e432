//! Safeguarded scalar root finding for boundary relations.

/// Outcome of [`solve_monotone`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub evaluations: usize,
}

const MAX_ITER: usize = 200;

/// Finds `x` with `f(x) = 0` starting from `guess`.
///
/// The bracket is grown geometrically around the guess until `f` changes
/// sign or `|x|` exceeds `limit`; inside the bracket secant steps are taken
/// and replaced by bisection whenever they leave it or stall.
pub fn solve_monotone(f: impl Fn(f64) -> f64, guess: f64, tol: f64, limit: f64) -> Option<Root> {
    let mut evaluations = 0;
    let mut eval = |x: f64| {
        evaluations += 1;
        f(x)
    };
    let f0 = eval(guess);
    if !f0.is_finite() {
        return None;
    }
    if f0.abs() <= tol {
        return Some(Root {
            x: guess,
            residual: f0,
            evaluations,
        });
    }

    let mut step = 1e-3 * guess.abs().max(1.0);
    let (mut a, mut fa, mut b, fb);
    loop {
        let lo = guess - step;
        let hi = guess + step;
        let flo = eval(lo);
        if flo.is_finite() && flo.signum() != f0.signum() {
            (a, fa, b, fb) = (lo, flo, guess, f0);
            break;
        }
        let fhi = eval(hi);
        if fhi.is_finite() && fhi.signum() != f0.signum() {
            (a, fa, b, fb) = (guess, f0, hi, fhi);
            break;
        }
        step *= 4.0;
        if step > limit {
            return None;
        }
    }

    // Secant with bisection fallback; (a, b) always brackets the root.
    let mut x_prev = a;
    let mut f_prev = fa;
    let mut x = b;
    let mut fx = fb;
    let mut last_width = (b - a).abs();
    let mut slow = 0;
    for _ in 0..MAX_ITER {
        let width = (b - a).abs();
        if fx.abs() <= tol {
            break;
        }
        if width <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
        let mut next = if fx != f_prev {
            x - fx * (x - x_prev) / (fx - f_prev)
        } else {
            f64::NAN
        };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if !(next > lo && next < hi) || slow >= 3 {
            next = 0.5 * (a + b);
            slow = 0;
        }
        let fn_ = eval(next);
        if !fn_.is_finite() {
            return None;
        }
        if fn_.signum() == fa.signum() {
            a = next;
            fa = fn_;
        } else {
            b = next;
        }
        let new_width = (b - a).abs();
        if new_width > 0.5 * last_width {
            slow += 1;
        } else {
            slow = 0;
        }
        last_width = new_width;
        x_prev = x;
        f_prev = fx;
        x = next;
        fx = fn_;
    }
    let best = if fx.abs() <= fa.abs() { (x, fx) } else { (a, fa) };
    Some(Root {
        x: best.0,
        residual: best.1,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear() {
        let r = solve_monotone(|p| 2.0 * p - 3.0, 0.0, 1e-14, 1e6).unwrap();
        assert!((r.x - 1.5).abs() < 1e-14);
    }

    #[test]
    fn nonlinear_far_root() {
        let r = solve_monotone(|p| p + p.powi(3) - 1000.0, 0.0, 1e-12, 1e6).unwrap();
        assert!(r.residual.abs() <= 1e-12);
        assert!((r.x + r.x.powi(3) - 1000.0).abs() <= 1e-12);
    }

    #[test]
    fn no_root() {
        assert!(solve_monotone(|p| p * p + 1.0, 0.0, 1e-12, 1e3).is_none());
    }

    #[test]
    fn exact_guess() {
        let r = solve_monotone(|p| p - 0.25, 0.25, 1e-12, 1e6).unwrap();
        assert_eq!(r.evaluations, 1);
    }
}
