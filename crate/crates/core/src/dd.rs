//! Double-double arithmetic: an unevaluated sum `hi + lo` carrying about
//! 106 bits. Used to accumulate the normal equations, whose conditioning is
//! the square of the underlying regression's.

use core::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let t = 134_217_729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

/// Exact product `a * b = p + e` (Dekker).
#[inline]
pub(crate) fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    Dd { hi: p, lo: e }
}

impl Dd {
    #[inline]
    pub fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    #[inline]
    fn normalize(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::normalize(s, e + f)
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, o: Dd) -> Dd {
        self + Dd { hi: -o.hi, lo: -o.lo }
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: f64) -> Dd {
        let p = two_prod(self.hi, b);
        Dd::normalize(p.hi, p.lo + self.lo * b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_error_term_is_exact() {
        let (a, b) = (0.1f64, 0.7f64);
        let p = two_prod(a, b);
        // 0.1 * 0.7 in binary has more than 53 significant bits.
        assert_ne!(p.lo, 0.0);
        assert_eq!(p.hi, a * b);
    }

    #[test]
    fn sums_keep_digits_lost_in_double() {
        let big = Dd::from_f64(1.0);
        let tiny = Dd::from_f64(1e-20);
        let s = big + tiny - big;
        assert_eq!(s.hi, 1e-20);
        let mut acc = Dd::default();
        for _ in 0..10 {
            acc = acc + Dd::from_f64(0.1);
        }
        // Ten copies of the double nearest 0.1 exceed 1 by 10 * 2^-54 * 0.1.
        assert!(((acc - Dd::from_f64(1.0)).hi - 5.551115123125783e-17).abs() < 1e-32);
    }
}
