//! Working-precision context and arbitrary-precision helpers.

use rug::float::Constant;
use rug::ops::CompleteRound;
use rug::{Complex, Float};

/// Working precision in bits. All tolerances derive from it as `2^(16-P)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prec(pub u32);

impl Prec {
    pub fn bits(self) -> u32 {
        self.0
    }

    /// Comparison tolerance `2^(16-P)`.
    pub fn tol(self) -> Float {
        let mut t = Float::with_val(self.0, 1);
        t <<= 16i32;
        t >>= self.0 as i32;
        t
    }

    /// Decimal digits representable at this precision (floor of P*log10(2)).
    pub fn digits(self) -> usize {
        (self.0 as f64 * std::f64::consts::LOG10_2).floor() as usize
    }

    pub fn float(self, v: i64) -> Float {
        Float::with_val(self.0, v)
    }

    pub fn pi(self) -> Float {
        Float::with_val(self.0, Constant::Pi)
    }

    pub fn zero(self) -> Complex {
        Complex::with_val(self.0, (0, 0))
    }

    pub fn one(self) -> Complex {
        Complex::with_val(self.0, (1, 0))
    }

    pub fn cplx(self, re: i64, im: i64) -> Complex {
        Complex::with_val(self.0, (re, im))
    }

    /// i*pi at this precision.
    pub fn i_pi(self) -> Complex {
        let pi = self.pi();
        Complex::with_val(self.0, (Float::with_val(self.0, 0), pi))
    }

    /// Parse a decimal string into a Float (used for shape fields).
    pub fn parse(self, s: &str) -> Option<Float> {
        Float::parse(s).ok().map(|p| Float::with_val(self.0, p))
    }
}

/// |a - b| as a Float.
pub fn cdist(a: &Complex, b: &Complex) -> Float {
    let d = (a - b).complete(a.prec());
    abs(&d)
}

/// |z| as a Float.
pub fn abs(z: &Complex) -> Float {
    Float::with_val(z.prec().0, z.abs_ref())
}

/// Render a Float as a plain decimal string with the given digit count.
/// Produces `-d.dddde[+-]x` style output, stable across platforms.
pub fn float_to_decimal(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let (sign, mantissa, exp) = x.to_sign_string_exp(10, Some(digits));
    let sign = if sign { "-" } else { "" };
    let mantissa = mantissa.trim_end_matches('0');
    let mantissa = if mantissa.is_empty() { "0" } else { mantissa };
    let (head, tail) = mantissa.split_at(1);
    let exp = exp.unwrap_or(0) - 1;
    if tail.is_empty() {
        format!("{sign}{head}e{exp}")
    } else {
        format!("{sign}{head}.{tail}e{exp}")
    }
}
