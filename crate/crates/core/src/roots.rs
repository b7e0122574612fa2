//! Bracketed scalar root finding.

use crate::num::Real;

pub const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootError {
    /// `g(lo)` and `g(hi)` have the same strict sign.
    NoSignChange,
    /// A function value was NaN.
    NotFinite,
}

/// Finds a root of `g` in `[lo, hi]` by secant steps safeguarded with bisection.
///
/// Stops once `|g| <= ftol` or the bracket has collapsed to rounding level.
/// With `ftol = 0` the bracket is always refined to machine precision.
pub fn bracketed<T: Real, F: FnMut(T) -> T>(
    mut g: F,
    lo: T,
    hi: T,
    ftol: T,
) -> Result<T, RootError> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut ga = g(a);
    let mut gb = g(b);
    if ga.is_nan() || gb.is_nan() {
        return Err(RootError::NotFinite);
    }
    if ga.abs() <= ftol || ga == T::zero() {
        return Ok(a);
    }
    if gb.abs() <= ftol || gb == T::zero() {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(RootError::NoSignChange);
    }
    let two = T::two();
    let mut best = if ga.abs() < gb.abs() { a } else { b };
    let mut best_g = ga.abs().min(gb.abs());
    let mut last_width = b - a;
    for _ in 0..MAX_ITER {
        let width = b - a;
        let scale = a.abs().max(b.abs()).max(T::min_positive_value());
        if width <= T::lit(4.0) * T::epsilon() * scale {
            break;
        }
        let mut x = b - gb * (b - a) / (gb - ga);
        let mid = (a + b) / two;
        // Fall back to bisection when the secant step leaves the bracket or stalls.
        if !(x > a && x < b) || width > T::half() * last_width {
            x = mid;
        }
        last_width = width;
        let gx = g(x);
        if gx.is_nan() {
            return Err(RootError::NotFinite);
        }
        if gx.abs() < best_g {
            best = x;
            best_g = gx.abs();
        }
        if gx.abs() <= ftol || gx == T::zero() {
            return Ok(x);
        }
        if gx.signum() == ga.signum() {
            a = x;
            ga = gx;
        } else {
            b = x;
            gb = gx;
        }
    }
    Ok(best)
}

/// Real roots of `c3 x^3 + c2 x^2 + c1 x + c0`, each polished by Newton steps.
pub fn cubic_roots<T: Real>(c3: T, c2: T, c1: T, c0: T) -> Vec<T> {
    let zero = T::zero();
    let lit = T::lit;
    let mut roots = Vec::new();
    if c3 == zero {
        if c2 == zero {
            if c1 != zero {
                roots.push(-c0 / c1);
            }
        } else {
            let disc = c1 * c1 - lit(4.0) * c2 * c0;
            if disc >= zero {
                let sgn = if c1 >= zero { T::one() } else { -T::one() };
                let q = -T::half() * (c1 + sgn * disc.sqrt());
                if q != zero {
                    roots.push(q / c2);
                    roots.push(c0 / q);
                } else {
                    roots.push(zero);
                }
            }
        }
    } else {
        let a = c2 / c3;
        let b = c1 / c3;
        let c = c0 / c3;
        let q = (a * a - lit(3.0) * b) / lit(9.0);
        let r = (lit(2.0) * a * a * a - lit(9.0) * a * b + lit(27.0) * c) / lit(54.0);
        let q3 = q * q * q;
        let third = a / lit(3.0);
        if r * r < q3 {
            let theta = (r / q3.sqrt()).max(-T::one()).min(T::one()).acos();
            let s = -lit(2.0) * q.sqrt();
            let tau = T::TAU();
            roots.push(s * (theta / lit(3.0)).cos() - third);
            roots.push(s * ((theta + tau) / lit(3.0)).cos() - third);
            roots.push(s * ((theta - tau) / lit(3.0)).cos() - third);
        } else {
            let big_a = -r.signum() * (r.abs() + (r * r - q3).sqrt()).cbrt();
            let big_b = if big_a != zero { q / big_a } else { zero };
            roots.push(big_a + big_b - third);
        }
    }
    let p = |x: T| ((c3 * x + c2) * x + c1) * x + c0;
    let dp = |x: T| (lit(3.0) * c3 * x + lit(2.0) * c2) * x + c1;
    for x in roots.iter_mut() {
        for _ in 0..8 {
            let d = dp(*x);
            if d == zero {
                break;
            }
            let next = *x - p(*x) / d;
            if p(next).abs() >= p(*x).abs() {
                break;
            }
            *x = next;
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracketed_sqrt2() {
        let r = bracketed(|x: f64| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bracketed_rejects_same_sign() {
        assert_eq!(
            bracketed(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-10),
            Err(RootError::NoSignChange)
        );
    }

    #[test]
    fn cubic_three_roots() {
        // (x-1)(x-2)(x+3) = x^3 - 7x + 6
        let mut r = cubic_roots(1.0f64, 0.0, -7.0, 6.0);
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((r[0] + 3.0).abs() < 1e-12);
        assert!((r[1] - 1.0).abs() < 1e-12);
        assert!((r[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_one_root() {
        let r = cubic_roots(1.0f64, 0.0, 1.0, -2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-12);
    }
}
