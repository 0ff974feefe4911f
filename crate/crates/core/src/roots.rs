//! Bracketing root finders used for inverse branches and window detection.

/// Bisection on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs.
///
/// Runs until the bracket cannot shrink further in double precision or its
/// width drops below `tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solve `g(x) = target` for increasing `g` on `[lo, hi]` by Newton steps
/// safeguarded with bisection. `g_dg` returns the value and derivative.
pub fn invert_increasing<F: FnMut(f64) -> (f64, f64)>(
    mut g_dg: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (gx, dg) = g_dg(x);
        let r = gx - target;
        if r == 0.0 {
            return x;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1e-300) {
            break;
        }
        let newton = x - r / dg;
        let next = if dg > 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x {
            break;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn inverse_of_cubic() {
        let x = invert_increasing(|x| (x * x * x, 3.0 * x * x), 0.125, 0.0, 1.0);
        assert!((x - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inverse_handles_flat_start() {
        // derivative vanishes at 0; the safeguard must take over
        let x = invert_increasing(|x| (x.powi(4), 4.0 * x.powi(3)), 1e-12, 0.0, 1.0);
        assert!((x.powi(4) - 1e-12).abs() < 1e-24);
    }
}
