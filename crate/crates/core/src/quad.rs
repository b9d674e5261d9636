//! Adaptive quadrature and bracketed root finding.
//!
//! The integrator is a 15-point Gauss-Kronrod rule driven by greedy interval
//! bisection: the segment with the largest error estimate is split until the
//! summed estimate drops below the requested absolute tolerance. Integrands
//! with known kinks should be split at the kink via [`integrate_split`] so
//! each segment stays smooth.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;

// 15-point Kronrod abscissae on [-1, 1] (symmetric; last entry is the origin)
// with the matching Kronrod weights and the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Gauss-Kronrod panel. Returns (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(mid - dx) + f(mid + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    kronrod *= half;
    gauss *= half;
    (kronrod, (kronrod - gauss).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

const MAX_SEGMENTS: usize = 4000;

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    integrate_split(f, a, b, abs_tol, &[])
}

/// Integrate with forced initial splits at the interior points in `splits`
/// (out-of-range or unordered entries are ignored).
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    splits: &[f64],
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::Numeric(format!("bad integration range [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut edges = vec![a];
    for &s in splits {
        if s > a && s < b {
            edges.push(s);
        }
    }
    edges.push(b);
    edges.sort_by(f64::total_cmp);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for pair in edges.windows(2) {
        let (value, err) = gk15(&f, pair[0], pair[1]);
        total += value;
        total_err += err;
        heap.push(Segment {
            a: pair[0],
            b: pair[1],
            value,
            err,
        });
    }

    while total_err > abs_tol && heap.len() < MAX_SEGMENTS {
        let worst = heap.pop().expect("heap nonempty while error positive");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at floating-point resolution; keep its estimate
            total_err -= worst.err;
            total = total - worst.value + worst.value;
            heap.push(Segment { err: 0.0, ..worst });
            continue;
        }
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.err;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            err: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            err: re,
        });
    }

    if total_err > abs_tol.max(1e-12) * 100.0 {
        return Err(Error::Numeric(format!(
            "quadrature failed to converge on [{a}, {b}]: residual error {total_err:.3e}"
        )));
    }
    Ok(total)
}

/// Brent's method on a bracketing interval. `f(lo)` and `f(hi)` must have
/// opposite signs (or one of them may be zero). Converges to relative time
/// tolerance `rel_tol` (plus a small absolute floor).
pub fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numeric(format!(
            "root not bracketed on [{a}, {b}]: f = ({fa:.3e}, {fb:.3e})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = b - a;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        // relative tolerance with a small absolute floor so roots near zero resolve
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * rel_tol * (b.abs() + 1e-3);
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() < tol || fa.abs() <= fb.abs() {
            d = m;
            e = m;
        } else {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                // secant
                (2.0 * m * s, 1.0 - s)
            } else {
                // inverse quadratic interpolation
                let q0 = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * q0 * (q0 - r) - (b - a) * (r - 1.0)),
                    (q0 - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::Numeric(format!(
        "root finding did not converge near {b}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 8.0, epsilon = 1e-10);
    }

    #[test]
    fn boundary_layer_integrand() {
        // steep exponential near the right endpoint
        let v = integrate(|x: f64| (-50.0 * (2.0 - x)).exp(), 0.0, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, (1.0 - (-100.0f64).exp()) / 50.0, epsilon = 1e-11);
    }

    #[test]
    fn split_handles_kink() {
        let v = integrate_split(|x: f64| (x - 1.0).abs(), 0.0, 2.0, 1e-12, &[1.0]).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_range_is_zero() {
        assert_eq!(integrate(|_| 1.0, 1.5, 1.5, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn root_of_cosine() {
        let r = find_root(|x| x.cos(), 0.0, 3.0, 1e-12).unwrap();
        assert_abs_diff_eq!(r, std::f64::consts::FRAC_PI_2, epsilon = 1e-10);
    }

    #[test]
    fn root_requires_bracket() {
        assert!(find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-10).is_err());
    }
}
