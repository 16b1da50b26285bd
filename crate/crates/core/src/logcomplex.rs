//! Complex numbers stored as (natural-log magnitude, argument).
//!
//! Coefficients such as `e_k ~ (πe/k)^k` and saddle values `|f(σ_k)| ~ e^k`
//! leave the range of `f64` long before the interesting orders are
//! reached. `LogComplex` keeps the magnitude as a logarithm, so products,
//! quotients and powers never overflow; conversion back to an ordinary
//! complex number happens only on request.

use std::fmt;
use std::ops::{Div, Mul, Neg};

use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::numeric::wrap_angle;

/// `exp(log_mag) · e^{i·arg}`; a `log_mag` of `-∞` encodes zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub log_mag: f64,
    pub arg: f64,
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex {
        log_mag: f64::NEG_INFINITY,
        arg: 0.0,
    };
    pub const ONE: LogComplex = LogComplex {
        log_mag: 0.0,
        arg: 0.0,
    };

    pub fn new(log_mag: f64, arg: f64) -> Self {
        if log_mag == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        LogComplex {
            log_mag,
            arg: wrap_angle(arg),
        }
    }

    /// `e^w` for a complex exponent `w`.
    pub fn exp(w: Complex64) -> Self {
        Self::new(w.re, w.im)
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z == Complex64::new(0.0, 0.0) {
            return Self::ZERO;
        }
        Self::new(z.norm().ln(), z.arg())
    }

    pub fn from_real(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }

    /// Logarithmic view of an arbitrary-precision real, without
    /// passing through `f64` (which could underflow).
    pub fn from_float(x: &Float) -> Self {
        if x.is_zero() {
            return Self::ZERO;
        }
        let (mantissa, exp) = x.to_f64_exp();
        let log_mag = mantissa.abs().ln() + f64::from(exp) * std::f64::consts::LN_2;
        let arg = if x.is_sign_negative() {
            std::f64::consts::PI
        } else {
            0.0
        };
        Self::new(log_mag, arg)
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    /// Principal logarithm `ln|z| + i·arg z`.
    pub fn ln(&self) -> Complex64 {
        Complex64::new(self.log_mag, self.arg)
    }

    /// Convert to an ordinary complex number; may overflow or underflow.
    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.log_mag.exp(), self.arg)
    }

    pub fn abs_log10(&self) -> f64 {
        self.log_mag / std::f64::consts::LN_10
    }

    pub fn conj(&self) -> Self {
        Self::new(self.log_mag, -self.arg)
    }

    pub fn recip(&self) -> Self {
        debug_assert!(!self.is_zero(), "reciprocal of zero");
        Self::new(-self.log_mag, -self.arg)
    }

    pub fn powi(&self, n: i64) -> Self {
        if self.is_zero() {
            return if n == 0 { Self::ONE } else { Self::ZERO };
        }
        let n = n as f64;
        Self::new(self.log_mag * n, self.arg * n)
    }

    /// Scale by a positive real factor given as its logarithm.
    pub fn scale_log(&self, log_factor: f64) -> Self {
        if self.is_zero() {
            return *self;
        }
        Self::new(self.log_mag + log_factor, self.arg)
    }

    /// Sum evaluated relative to the larger operand.
    pub fn add(&self, other: &LogComplex) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (big, small) = if self.log_mag >= other.log_mag {
            (self, other)
        } else {
            (other, self)
        };
        let ratio = Complex64::from_polar((small.log_mag - big.log_mag).exp(), small.arg - big.arg);
        let factor = Complex64::new(1.0, 0.0) + ratio;
        // cancellation below rounding level is an exact zero
        if factor.norm() <= 4.0 * f64::EPSILON {
            return Self::ZERO;
        }
        Self::new(big.log_mag + factor.norm().ln(), big.arg + factor.arg())
    }

    pub fn sub(&self, other: &LogComplex) -> Self {
        self.add(&-*other)
    }

    /// Sum of many terms, accumulated relative to the largest magnitude.
    pub fn sum<'a, I: IntoIterator<Item = &'a LogComplex>>(terms: I) -> Self {
        let terms: Vec<&LogComplex> = terms.into_iter().collect();
        let peak = terms
            .iter()
            .map(|t| t.log_mag)
            .fold(f64::NEG_INFINITY, f64::max);
        if peak == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let total: Complex64 = terms
            .iter()
            .filter(|t| !t.is_zero())
            .map(|t| Complex64::from_polar((t.log_mag - peak).exp(), t.arg))
            .sum();
        Self::from_complex(total).scale_log(peak)
    }
}

impl Mul for LogComplex {
    type Output = LogComplex;

    fn mul(self, rhs: LogComplex) -> LogComplex {
        if self.is_zero() || rhs.is_zero() {
            return LogComplex::ZERO;
        }
        LogComplex::new(self.log_mag + rhs.log_mag, self.arg + rhs.arg)
    }
}

impl Div for LogComplex {
    type Output = LogComplex;

    fn div(self, rhs: LogComplex) -> LogComplex {
        self * rhs.recip()
    }
}

impl Neg for LogComplex {
    type Output = LogComplex;

    fn neg(self) -> LogComplex {
        if self.is_zero() {
            return self;
        }
        LogComplex::new(self.log_mag, self.arg + std::f64::consts::PI)
    }
}

impl fmt::Display for LogComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        write!(f, "exp({})·e^(i·{})", self.log_mag, self.arg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn zero_and_one() {
        assert!(LogComplex::ZERO.is_zero());
        assert_eq!(LogComplex::from_real(1.0), LogComplex::ONE);
        assert!(LogComplex::from_real(0.0).is_zero());
        assert!((LogComplex::ZERO * LogComplex::ONE).is_zero());
    }

    #[test]
    fn float_conversion_beyond_f64_range() {
        let x = Float::with_val(128, Float::parse("-3.5e-900").unwrap());
        let l = LogComplex::from_float(&x);
        assert_relative_eq!(l.abs_log10(), -900.0 + 3.5f64.log10(), epsilon = 1e-12);
        assert_relative_eq!(l.arg, std::f64::consts::PI);
    }

    #[test]
    fn sum_with_cancellation_to_zero() {
        let a = LogComplex::from_real(2.5);
        assert!(a.sub(&a).is_zero());
    }

    proptest! {
        #[test]
        fn arithmetic_matches_complex(
            ar in -50.0..50.0f64, ai in -50.0..50.0f64,
            br in -50.0..50.0f64, bi in -50.0..50.0f64,
        ) {
            let a = Complex64::new(ar, ai);
            let b = Complex64::new(br, bi);
            prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
            let la = LogComplex::from_complex(a);
            let lb = LogComplex::from_complex(b);
            prop_assert!(close((la * lb).to_complex(), a * b, 1e-12));
            prop_assert!(close((la / lb).to_complex(), a / b, 1e-12));
            prop_assert!(close(la.powi(3).to_complex(), a * a * a, 1e-12));
            let s = a + b;
            if s.norm() > 1e-3 * (a.norm() + b.norm()) {
                prop_assert!(close(la.add(&lb).to_complex(), s, 1e-9));
            }
            prop_assert!(la.arg > -std::f64::consts::PI && la.arg <= std::f64::consts::PI);
        }
    }
}
