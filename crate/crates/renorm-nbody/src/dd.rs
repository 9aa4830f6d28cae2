//! Double-double arithmetic: an unevaluated sum of two `f64` giving roughly
//! 106 bits (~31 decimal digits) of precision.
//!
//! Used for validating Butcher tableau data beyond binary64 resolution and,
//! with the `extended` feature, as the extended-precision scalar backend.
//! The algorithms are the classical error-free transformations (Dekker,
//! Knuth) as organized in Bailey's QD library.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

/// Knuth two-sum: s + err == a + b exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Fast two-sum, valid when |a| >= |b|.
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

/// p + err == a * b exactly (via FMA).
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl DoubleDouble {
    pub const ZERO: Self = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = DoubleDouble { hi: 1.0, lo: 0.0 };

    /// Unit roundoff of the format, 2^-105.
    pub const EPSILON: f64 = 2.465190328815662e-32;

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Self {
        let (s, e) = quick_two_sum(hi, lo);
        DoubleDouble { hi: s, lo: e }
    }

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn sqrt(self) -> Self {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Self::ZERO;
        }
        if self.hi < 0.0 {
            return Self::from_f64(f64::NAN);
        }
        // One Newton step on y0 = sqrt(hi): y = y0 + (a - y0^2) / (2 y0).
        let y0 = Self::from_f64(self.hi.sqrt());
        let diff = self - y0 * y0;
        y0 + diff / (y0 + y0)
    }

    pub fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::ONE;
        }
        let mut base = if n < 0 { Self::ONE / self } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Self::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }

    pub fn max(self, other: Self) -> Self {
        if self < other {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Parse a plain decimal string ("-1.25e-3", "0.5", "12") into the
    /// nearest double-double. Digits are accumulated in chunks that stay
    /// exact in `f64`; the final scaling loses at most ~1 ulp of the format.
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim();
        let mut chars = t.chars().peekable();
        let mut negative = false;
        match chars.peek() {
            Some('+') => {
                chars.next();
            }
            Some('-') => {
                negative = true;
                chars.next();
            }
            _ => {}
        }
        let mut value = DoubleDouble::ZERO;
        let mut chunk: u64 = 0;
        let mut chunk_digits = 0u32;
        let mut frac_digits: i32 = 0;
        let mut seen_digit = false;
        let mut seen_point = false;
        let mut exponent: i32 = 0;
        let flush = |value: &mut DoubleDouble, chunk: &mut u64, chunk_digits: &mut u32| {
            if *chunk_digits > 0 {
                *value = *value * DoubleDouble::from_f64(10f64.powi(*chunk_digits as i32))
                    + DoubleDouble::from_f64(*chunk as f64);
                *chunk = 0;
                *chunk_digits = 0;
            }
        };
        while let Some(&c) = chars.peek() {
            match c {
                '0'..='9' => {
                    chars.next();
                    chunk = chunk * 10 + (c as u64 - '0' as u64);
                    chunk_digits += 1;
                    seen_digit = true;
                    if seen_point {
                        frac_digits += 1;
                    }
                    if chunk_digits == 15 {
                        flush(&mut value, &mut chunk, &mut chunk_digits);
                    }
                }
                '.' if !seen_point => {
                    chars.next();
                    seen_point = true;
                }
                'e' | 'E' => {
                    chars.next();
                    let rest: String = chars.by_ref().collect();
                    exponent = rest.parse().ok()?;
                    break;
                }
                _ => return None,
            }
        }
        if !seen_digit || chars.next().is_some() {
            return None;
        }
        flush(&mut value, &mut chunk, &mut chunk_digits);
        let scale = exponent - frac_digits;
        if scale != 0 {
            // 10^|scale| in double-double; exact for |scale| <= 31.
            let ten = DoubleDouble::from_f64(10.0);
            let pow = ten.powi(scale.abs());
            value = if scale > 0 { value * pow } else { value / pow };
        }
        Some(if negative { -value } else { value })
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        DoubleDouble { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let (p1, p2) = two_prod(self.hi, rhs.hi);
        let p2 = p2 + self.hi * rhs.lo + self.lo * rhs.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        // Long division with three quotient terms.
        let q1 = self.hi / rhs.hi;
        let mut r = self - DoubleDouble::from_f64(q1) * rhs;
        let q2 = r.hi / rhs.hi;
        r -= DoubleDouble::from_f64(q2) * rhs;
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        DoubleDouble::new(s, e + q3)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl AddAssign for DoubleDouble {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}
impl SubAssign for DoubleDouble {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}
impl MulAssign for DoubleDouble {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}
impl DivAssign for DoubleDouble {
    #[inline]
    fn div_assign(&mut self, rhs: Self) {
        *self = *self / rhs;
    }
}

impl PartialEq for DoubleDouble {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Shortest-roundtrip of the leading component plus the residual is
        // enough for diagnostics; reports go through f64 anyway.
        if self.lo == 0.0 {
            write!(f, "{}", self.hi)
        } else {
            write!(f, "{}{:+e}", self.hi, self.lo)
        }
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: DoubleDouble, b: DoubleDouble, tol: f64) -> bool {
        (a - b).abs().to_f64() <= tol
    }

    #[test]
    fn third_times_three() {
        let third = DoubleDouble::ONE / DoubleDouble::from_f64(3.0);
        let one = third * DoubleDouble::from_f64(3.0);
        assert!(close(one, DoubleDouble::ONE, 1e-31));
    }

    #[test]
    fn sqrt_two_squared() {
        let two = DoubleDouble::from_f64(2.0);
        let r = two.sqrt();
        assert!(close(r * r, two, 1e-31));
        // First 32 digits of sqrt(2): 1.4142135623730950488016887242096...
        let reference = DoubleDouble::parse("1.4142135623730950488016887242096").unwrap();
        assert!(close(r, reference, 1e-30));
    }

    #[test]
    fn add_tracks_small_terms() {
        let a = DoubleDouble::from_f64(1.0);
        let b = DoubleDouble::from_f64(1e-25);
        let c = a + b - a;
        assert!(close(c, b, 1e-40));
    }

    #[test]
    fn parse_roundtrip_simple() {
        for s in [
            "0.5",
            "-1.25",
            "12",
            "1e3",
            "2.5e-3",
            "0.035709999999999999",
        ] {
            let v = DoubleDouble::parse(s).unwrap();
            let direct: f64 = s.parse().unwrap();
            assert!((v.to_f64() - direct).abs() <= direct.abs() * 1e-15);
        }
        assert!(DoubleDouble::parse("abc").is_none());
        assert!(DoubleDouble::parse("1.2.3").is_none());
        assert!(DoubleDouble::parse("").is_none());
    }

    #[test]
    fn parse_long_decimal() {
        // 1/7 to 40 digits.
        let v = DoubleDouble::parse("0.1428571428571428571428571428571428571429").unwrap();
        let seventh = DoubleDouble::ONE / DoubleDouble::from_f64(7.0);
        assert!(close(v, seventh, 1e-31));
    }

    #[test]
    fn powi_matches_repeated_mul() {
        let x = DoubleDouble::from_f64(1.5);
        let mut acc = DoubleDouble::ONE;
        for _ in 0..7 {
            acc *= x;
        }
        assert!(close(x.powi(7), acc, 1e-30));
        assert!(close(x.powi(-2), DoubleDouble::ONE / (x * x), 1e-30));
    }
}
