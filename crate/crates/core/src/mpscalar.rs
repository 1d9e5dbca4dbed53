//! Precision-parameterized real and complex scalars.
//!
//! [`MPReal`] wraps an MPFR float whose binary precision is derived from a
//! decimal [`Precision`]. Every arithmetic result is clamped to an exponent
//! range tied to that precision, so overflow produces a signed infinity and
//! underflow a signed zero. Infinities and NaN propagate like IEEE values;
//! nothing here panics on a bad operand.
//!
//! [`MPComplex`] is a pair of [`MPReal`]s with the elementary functions built
//! from their real counterparts.
//!
//! Binary operators take the precision of the left operand.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use rug::float::{Constant, Round, Special};
use rug::{Assign, Float};
use thiserror::Error;

/// Decimal digits below which a [`Precision`] is rejected.
pub const MIN_DIGITS: u32 = 10;

/// Guard bits added on top of the decimal requirement.
pub const GUARD_BITS: u32 = 32;

/// Roughly IEEE binary128 significand width, used for basin renders.
pub const QUAD_DIGITS: u32 = 34;

const LOG2_10: f64 = std::f64::consts::LOG2_10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("precision of {0} digits is below the minimum of {MIN_DIGITS}")]
    PrecisionTooSmall(u32),
    #[error("phase of zero is undefined")]
    UndefinedPhase,
    #[error("cannot parse {0:?} as a number")]
    Parse(String),
}

/// Working precision in decimal significant digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Precision {
    digits: u32,
}

impl Precision {
    pub fn new(digits: u32) -> Result<Self, ScalarError> {
        if digits < MIN_DIGITS {
            return Err(ScalarError::PrecisionTooSmall(digits));
        }
        Ok(Self { digits })
    }

    /// Panicking constructor for literals known to be valid.
    pub fn digits_const(digits: u32) -> Self {
        Self::new(digits).expect("precision below minimum")
    }

    pub fn quad() -> Self {
        Self { digits: QUAD_DIGITS }
    }

    pub fn digits(self) -> u32 {
        self.digits
    }

    /// `ceil(digits * log2(10)) + GUARD_BITS`.
    pub fn bits(self) -> u32 {
        (f64::from(self.digits) * LOG2_10).ceil() as u32 + GUARD_BITS
    }

    /// Largest binary exponent a finite value may carry at this precision.
    ///
    /// At 34 digits this is 2^14, the binary128 range. Wider precisions get a
    /// proportionally wider range so tiny residuals never flush to zero.
    pub fn max_exponent(self) -> i32 {
        Self::max_exponent_for_bits(self.bits())
    }

    fn max_exponent_for_bits(bits: u32) -> i32 {
        (16 * bits).max(1 << 14) as i32
    }

    /// Inverse of [`Precision::bits`] for bit counts produced by it.
    pub fn from_bits(bits: u32) -> Self {
        let digits = (f64::from(bits.saturating_sub(GUARD_BITS)) / LOG2_10).floor() as u32;
        Self { digits: digits.max(MIN_DIGITS) }
    }

    /// `10^exponent` at this precision.
    pub fn pow10(self, exponent: i64) -> MPReal {
        MPReal::from_i64(10, self).powi(exponent)
    }

    /// One unit in the last kept decimal digit, relative to magnitude 1.
    pub fn decimal_ulp(self) -> MPReal {
        self.pow10(1 - i64::from(self.digits))
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} digits", self.digits)
    }
}

/// An arbitrary-precision real number.
#[derive(Clone)]
pub struct MPReal(Float);

impl MPReal {
    fn clamped(mut v: Float) -> Self {
        if let Some(exp) = v.get_exp() {
            let limit = Precision::max_exponent_for_bits(v.prec());
            if exp > limit {
                let neg = v.is_sign_negative();
                v.assign(if neg { Special::NegInfinity } else { Special::Infinity });
            } else if exp < -limit {
                let neg = v.is_sign_negative();
                v.assign(if neg { Special::NegZero } else { Special::Zero });
            }
        }
        MPReal(v)
    }

    fn special(s: Special, p: Precision) -> Self {
        MPReal(Float::with_val(p.bits(), s))
    }

    pub fn zero(p: Precision) -> Self {
        Self::special(Special::Zero, p)
    }

    pub fn one(p: Precision) -> Self {
        Self::from_i64(1, p)
    }

    pub fn nan(p: Precision) -> Self {
        Self::special(Special::Nan, p)
    }

    pub fn infinity(p: Precision) -> Self {
        Self::special(Special::Infinity, p)
    }

    pub fn neg_infinity(p: Precision) -> Self {
        Self::special(Special::NegInfinity, p)
    }

    pub fn pi(p: Precision) -> Self {
        MPReal(Float::with_val(p.bits(), Constant::Pi))
    }

    pub fn from_i64(v: i64, p: Precision) -> Self {
        MPReal(Float::with_val(p.bits(), v))
    }

    /// Exact conversion of the binary value of `v`.
    pub fn from_f64(v: f64, p: Precision) -> Self {
        Self::clamped(Float::with_val(p.bits(), v))
    }

    /// Parses decimal text (`"-1.25"`, `"1e-8"`, `"inf"`, `"nan"`), rounding
    /// once to the target precision.
    pub fn parse(text: &str, p: Precision) -> Result<Self, ScalarError> {
        let t = text.trim();
        let lowered = t.to_ascii_lowercase();
        let special = match lowered.as_str() {
            "nan" | "+nan" | "-nan" => Some(Special::Nan),
            "inf" | "+inf" | "infinity" | "+infinity" => Some(Special::Infinity),
            "-inf" | "-infinity" => Some(Special::NegInfinity),
            _ => None,
        };
        if let Some(s) = special {
            return Ok(Self::special(s, p));
        }
        // MPFR accepts forms such as "@inf@" and "0x1p3"; only plain decimals are wanted here.
        let ok = !t.is_empty()
            && t.bytes()
                .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'))
            && t.bytes().any(|b| b.is_ascii_digit());
        if !ok {
            return Err(ScalarError::Parse(text.to_string()));
        }
        let parsed = Float::parse(t).map_err(|_| ScalarError::Parse(text.to_string()))?;
        Ok(Self::clamped(Float::with_val(p.bits(), parsed)))
    }

    pub fn precision(&self) -> Precision {
        Precision::from_bits(self.0.prec())
    }

    /// Rounds (or widens) to another precision.
    pub fn with_precision(&self, p: Precision) -> Self {
        Self::clamped(Float::with_val(p.bits(), &self.0))
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    pub fn is_nan(&self) -> bool {
        self.0.is_nan()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// The value as an `i64` when it is an integer in range.
    pub fn to_i64_exact(&self) -> Option<i64> {
        // 2^53 keeps the f64 detour exact
        if !self.0.is_integer() || self.0.clone().abs() > (1u64 << 53) {
            return None;
        }
        Some(self.0.to_f64() as i64)
    }

    pub fn abs(&self) -> Self {
        MPReal(self.0.clone().abs())
    }

    pub fn square(&self) -> Self {
        Self::clamped(self.0.clone().square())
    }

    pub fn sqrt(&self) -> Self {
        Self::clamped(self.0.clone().sqrt())
    }

    pub fn exp(&self) -> Self {
        Self::clamped(self.0.clone().exp())
    }

    pub fn ln(&self) -> Self {
        Self::clamped(self.0.clone().ln())
    }

    pub fn log10(&self) -> Self {
        Self::clamped(self.0.clone().log10())
    }

    pub fn sin(&self) -> Self {
        Self::clamped(self.0.clone().sin())
    }

    pub fn cos(&self) -> Self {
        Self::clamped(self.0.clone().cos())
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let (s, c) = self.0.clone().sin_cos(Float::new(self.0.prec()));
        (Self::clamped(s), Self::clamped(c))
    }

    pub fn sinh_cosh(&self) -> (Self, Self) {
        let (s, c) = self.0.clone().sinh_cosh(Float::new(self.0.prec()));
        (Self::clamped(s), Self::clamped(c))
    }

    /// `atan2(self, x)`, the angle of the point `(x, self)`.
    pub fn atan2(&self, x: &Self) -> Self {
        Self::clamped(self.0.clone().atan2(&x.0))
    }

    pub fn hypot(&self, other: &Self) -> Self {
        Self::clamped(self.0.clone().hypot(&other.0))
    }

    pub fn pow(&self, e: &Self) -> Self {
        Self::clamped(rug::ops::Pow::pow(self.0.clone(), &e.0))
    }

    pub fn powi(&self, n: i64) -> Self {
        let n = n.clamp(i64::from(i32::MIN), i64::from(i32::MAX)) as i32;
        Self::clamped(rug::ops::Pow::pow(self.0.clone(), n))
    }

    /// `log10|x|`; zero maps to negative infinity.
    pub fn log10_abs(&self) -> Self {
        self.abs().log10()
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Enough decimal digits to recover the binary value exactly.
    pub fn full_digits(&self) -> usize {
        (f64::from(self.0.prec()) / LOG2_10).ceil() as usize + 1
    }

    /// Decimal rendering with exactly `digits` significant digits.
    ///
    /// Magnitudes of 10^6 and up or below 10^-6 use `d.ddd…e±EEEE` with the
    /// exponent zero-padded to four digits; everything else is positional.
    pub fn to_decimal(&self, digits: usize) -> String {
        let digits = digits.max(1);
        if self.0.is_nan() {
            return "nan".to_string();
        }
        if self.0.is_infinite() {
            return if self.0.is_sign_negative() { "-inf" } else { "inf" }.to_string();
        }
        let (neg, mant, exp) = self.0.to_sign_string_exp_round(10, Some(digits), Round::Nearest);
        let sign = if neg { "-" } else { "" };
        let Some(exp) = exp else {
            // zero
            let frac = "0".repeat(digits.saturating_sub(1));
            return if frac.is_empty() {
                format!("{sign}0")
            } else {
                format!("{sign}0.{frac}")
            };
        };
        // value = 0.mant * 10^exp = m.ant * 10^(exp-1)
        let sci = i64::from(exp) - 1;
        if !(-6..=5).contains(&sci) {
            let (head, tail) = mant.split_at(1);
            let esign = if sci < 0 { '-' } else { '+' };
            return if tail.is_empty() {
                format!("{sign}{head}e{esign}{:04}", sci.abs())
            } else {
                format!("{sign}{head}.{tail}e{esign}{:04}", sci.abs())
            };
        }
        if sci >= 0 {
            let int_len = (sci as usize) + 1;
            if mant.len() <= int_len {
                let pad = "0".repeat(int_len - mant.len());
                format!("{sign}{mant}{pad}")
            } else {
                let (int, frac) = mant.split_at(int_len);
                format!("{sign}{int}.{frac}")
            }
        } else {
            let zeros = "0".repeat((-sci - 1) as usize);
            format!("{sign}0.{zeros}{mant}")
        }
    }

    /// Rendering that survives a parse round trip exactly.
    pub fn to_decimal_full(&self) -> String {
        self.to_decimal(self.full_digits())
    }
}

impl fmt::Debug for MPReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MPReal({})", self.to_decimal(20))
    }
}

impl fmt::Display for MPReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or_else(|| self.precision().digits() as usize);
        f.write_str(&self.to_decimal(digits))
    }
}

impl PartialEq for MPReal {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl PartialOrd for MPReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

macro_rules! real_binop {
    ($tr:ident, $method:ident, $assign_tr:ident, $assign:ident) => {
        impl $tr<&MPReal> for MPReal {
            type Output = MPReal;
            fn $method(mut self, rhs: &MPReal) -> MPReal {
                self.0.$assign(&rhs.0);
                MPReal::clamped(self.0)
            }
        }
        impl $tr<MPReal> for MPReal {
            type Output = MPReal;
            fn $method(self, rhs: MPReal) -> MPReal {
                self.$method(&rhs)
            }
        }
        impl $tr<&MPReal> for &MPReal {
            type Output = MPReal;
            fn $method(self, rhs: &MPReal) -> MPReal {
                self.clone().$method(rhs)
            }
        }
        impl $tr<MPReal> for &MPReal {
            type Output = MPReal;
            fn $method(self, rhs: MPReal) -> MPReal {
                self.clone().$method(&rhs)
            }
        }
        impl $assign_tr<&MPReal> for MPReal {
            fn $assign(&mut self, rhs: &MPReal) {
                self.0.$assign(&rhs.0);
                let v = std::mem::replace(&mut self.0, Float::new(rug::float::prec_min()));
                *self = MPReal::clamped(v);
            }
        }
    };
}

real_binop!(Add, add, AddAssign, add_assign);
real_binop!(Sub, sub, SubAssign, sub_assign);
real_binop!(Mul, mul, MulAssign, mul_assign);
real_binop!(Div, div, DivAssign, div_assign);

use std::ops::DivAssign;

impl Neg for MPReal {
    type Output = MPReal;
    fn neg(self) -> MPReal {
        MPReal(-self.0)
    }
}

impl Neg for &MPReal {
    type Output = MPReal;
    fn neg(self) -> MPReal {
        MPReal(-self.0.clone())
    }
}

/// An arbitrary-precision complex number.
#[derive(Clone, PartialEq)]
pub struct MPComplex {
    pub re: MPReal,
    pub im: MPReal,
}

impl MPComplex {
    pub fn new(re: MPReal, im: MPReal) -> Self {
        Self { re, im }
    }

    pub fn from_f64(re: f64, im: f64, p: Precision) -> Self {
        Self::new(MPReal::from_f64(re, p), MPReal::from_f64(im, p))
    }

    pub fn from_real(re: MPReal) -> Self {
        let im = MPReal::zero(re.precision());
        Self { re, im }
    }

    /// Parses `a`, `bi`, `a+bi`, `a-bi` (also with `j`, whitespace ignored).
    pub fn parse(text: &str, p: Precision) -> Result<Self, ScalarError> {
        let err = || ScalarError::Parse(text.to_string());
        let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(err());
        }
        let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
            return Ok(Self::from_real(MPReal::parse(&t, p).map_err(|_| err())?));
        };
        // split at the last sign that is not an exponent sign or the leading sign
        let bytes = body.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            if matches!(bytes[idx], b'+' | b'-') && !matches!(bytes[idx - 1], b'e' | b'E') {
                split = Some(idx);
                break;
            }
        }
        let (re_text, im_text) = match split {
            Some(idx) => body.split_at(idx),
            None => ("0", body),
        };
        let im_text = match im_text {
            "" | "+" => "1",
            "-" => "-1",
            other => other,
        };
        let re = MPReal::parse(re_text, p).map_err(|_| err())?;
        let im = MPReal::parse(im_text, p).map_err(|_| err())?;
        Ok(Self { re, im })
    }

    pub fn precision(&self) -> Precision {
        self.re.precision()
    }

    pub fn is_nan(&self) -> bool {
        self.re.is_nan() || self.im.is_nan()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -&self.im)
    }

    pub fn abs(&self) -> MPReal {
        self.re.hypot(&self.im)
    }

    pub fn norm_sqr(&self) -> MPReal {
        self.re.square() + self.im.square()
    }

    /// `arg(z)` in `(-π, π]`.
    pub fn phase(&self) -> Result<MPReal, ScalarError> {
        if self.is_zero() {
            return Err(ScalarError::UndefinedPhase);
        }
        // MPFR gives atan2(-0, -1) = -π; the branch convention wants +π.
        let im = if self.im.is_zero() { self.im.abs() } else { self.im.clone() };
        Ok(im.atan2(&self.re))
    }

    pub fn square(&self) -> Self {
        let re = self.re.square() - self.im.square();
        let im = (&self.re * &self.im) * MPReal::from_i64(2, self.precision());
        Self { re, im }
    }

    pub fn exp(&self) -> Self {
        let scale = self.re.exp();
        let (s, c) = self.im.sin_cos();
        Self::new(&scale * c, scale * s)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.re.sin_cos();
        let (sh, ch) = self.im.sinh_cosh();
        Self::new(s * ch, c * sh)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.re.sin_cos();
        let (sh, ch) = self.im.sinh_cosh();
        Self::new(c * ch, -(s * sh))
    }

    /// Principal square root, branch cut along the negative real axis.
    pub fn sqrt(&self) -> Self {
        let p = self.precision();
        if self.is_zero() {
            return Self::new(MPReal::zero(p), MPReal::zero(p));
        }
        let two = MPReal::from_i64(2, p);
        let r = self.abs();
        let t = ((self.re.abs() + &r) / &two).sqrt();
        if !self.re.is_sign_negative() {
            let im = &self.im / (&t * &two);
            Self::new(t, im)
        } else {
            let re = self.im.abs() / (&t * &two);
            let im = if self.im.is_sign_negative() { -t } else { t };
            Self::new(re, im)
        }
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        let re = self.abs().ln();
        let im = if self.im.is_zero() { self.im.abs() } else { self.im.clone() };
        Self::new(re, im.atan2(&self.re))
    }

    pub fn powi(&self, n: i64) -> Self {
        let p = self.precision();
        let mut base = self.clone();
        let mut acc = Self::from_real(MPReal::one(p));
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = base.square();
            }
        }
        if n < 0 {
            Self::from_real(MPReal::one(p)) / acc
        } else {
            acc
        }
    }

    pub fn pow(&self, e: &Self) -> Self {
        if e.im.is_zero() {
            if let Some(n) = e.re.to_i64_exact() {
                if n.unsigned_abs() <= 1 << 20 {
                    return self.powi(n);
                }
            }
        }
        if self.is_zero() {
            let p = self.precision();
            return if e.re > MPReal::zero(p) {
                Self::from_real(MPReal::zero(p))
            } else {
                Self::new(MPReal::nan(p), MPReal::nan(p))
            };
        }
        (self.ln() * e).exp()
    }

    pub fn to_decimal(&self, digits: usize) -> String {
        let re = self.re.to_decimal(digits);
        let im = self.im.to_decimal(digits);
        if im.starts_with('-') {
            format!("{re}{im}i")
        } else {
            format!("{re}+{im}i")
        }
    }

    pub fn to_decimal_full(&self) -> String {
        self.to_decimal(self.re.full_digits())
    }
}

impl fmt::Debug for MPComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MPComplex({})", self.to_decimal(20))
    }
}

impl fmt::Display for MPComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or_else(|| self.precision().digits() as usize);
        f.write_str(&self.to_decimal(digits))
    }
}

impl Add<&MPComplex> for MPComplex {
    type Output = MPComplex;
    fn add(self, rhs: &MPComplex) -> MPComplex {
        MPComplex::new(self.re + &rhs.re, self.im + &rhs.im)
    }
}

impl Sub<&MPComplex> for MPComplex {
    type Output = MPComplex;
    fn sub(self, rhs: &MPComplex) -> MPComplex {
        MPComplex::new(self.re - &rhs.re, self.im - &rhs.im)
    }
}

impl Mul<&MPComplex> for MPComplex {
    type Output = MPComplex;
    fn mul(self, rhs: &MPComplex) -> MPComplex {
        let re = &self.re * &rhs.re - &self.im * &rhs.im;
        let im = self.re * &rhs.im + self.im * &rhs.re;
        MPComplex::new(re, im)
    }
}

impl Div<&MPComplex> for MPComplex {
    type Output = MPComplex;
    /// Smith's algorithm; a zero divisor yields NaN in both parts unless the
    /// divisor is purely real, where the real rules apply componentwise.
    fn div(self, rhs: &MPComplex) -> MPComplex {
        let p = self.precision();
        if rhs.im.is_zero() {
            return MPComplex::new(self.re / &rhs.re, self.im / &rhs.re);
        }
        if rhs.re.is_zero() {
            // (a+bi)/(di) = b/d - (a/d)i
            return MPComplex::new(self.im / &rhs.im, -(self.re / &rhs.im));
        }
        if !rhs.is_finite() || rhs.is_nan() {
            return MPComplex::new(MPReal::nan(p), MPReal::nan(p));
        }
        if rhs.re.abs() >= rhs.im.abs() {
            let r = &rhs.im / &rhs.re;
            let den = &rhs.re + &rhs.im * &r;
            let re = (&self.re + &self.im * &r) / &den;
            let im = (self.im - self.re * &r) / &den;
            MPComplex::new(re, im)
        } else {
            let r = &rhs.re / &rhs.im;
            let den = &rhs.re * &r + &rhs.im;
            let re = (&self.re * &r + &self.im) / &den;
            let im = (self.im * &r - self.re) / &den;
            MPComplex::new(re, im)
        }
    }
}

macro_rules! complex_owned_rhs {
    ($tr:ident, $method:ident) => {
        impl $tr<MPComplex> for MPComplex {
            type Output = MPComplex;
            fn $method(self, rhs: MPComplex) -> MPComplex {
                self.$method(&rhs)
            }
        }
        impl $tr<&MPComplex> for &MPComplex {
            type Output = MPComplex;
            fn $method(self, rhs: &MPComplex) -> MPComplex {
                self.clone().$method(rhs)
            }
        }
    };
}

complex_owned_rhs!(Add, add);
complex_owned_rhs!(Sub, sub);
complex_owned_rhs!(Mul, mul);
complex_owned_rhs!(Div, div);

impl Neg for MPComplex {
    type Output = MPComplex;
    fn neg(self) -> MPComplex {
        MPComplex::new(-self.re, -self.im)
    }
}

/// Operations shared by [`MPReal`] and [`MPComplex`]; the kernel, the
/// expression evaluator and the iteration driver are generic over it.
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + Sub<Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + Mul<Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + Div<Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + Neg<Output = Self>
{
    const IS_COMPLEX: bool;

    fn from_real(x: MPReal) -> Self;
    fn precision(&self) -> Precision;
    fn abs(&self) -> MPReal;
    fn is_zero(&self) -> bool;
    fn is_finite(&self) -> bool;
    fn is_nan(&self) -> bool;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn ln(&self) -> Self;
    fn powi(&self, n: i64) -> Self;
    fn pow(&self, e: &Self) -> Self;
    fn square(&self) -> Self;
    fn to_decimal(&self, digits: usize) -> String;
    fn to_decimal_full(&self) -> String;
    fn parse(text: &str, p: Precision) -> Result<Self, ScalarError>;

    fn zero(p: Precision) -> Self {
        Self::from_real(MPReal::zero(p))
    }

    fn one(p: Precision) -> Self {
        Self::from_real(MPReal::one(p))
    }

    fn from_i64(v: i64, p: Precision) -> Self {
        Self::from_real(MPReal::from_i64(v, p))
    }

    fn nan(p: Precision) -> Self {
        Self::from_real(MPReal::nan(p))
    }

    /// `log10|x|`, negative infinity at zero.
    fn log10_abs(&self) -> MPReal {
        self.abs().log10()
    }
}

impl Scalar for MPReal {
    const IS_COMPLEX: bool = false;

    fn from_real(x: MPReal) -> Self {
        x
    }
    fn precision(&self) -> Precision {
        MPReal::precision(self)
    }
    fn abs(&self) -> MPReal {
        MPReal::abs(self)
    }
    fn is_zero(&self) -> bool {
        MPReal::is_zero(self)
    }
    fn is_finite(&self) -> bool {
        MPReal::is_finite(self)
    }
    fn is_nan(&self) -> bool {
        MPReal::is_nan(self)
    }
    fn exp(&self) -> Self {
        MPReal::exp(self)
    }
    fn sin(&self) -> Self {
        MPReal::sin(self)
    }
    fn cos(&self) -> Self {
        MPReal::cos(self)
    }
    fn sqrt(&self) -> Self {
        MPReal::sqrt(self)
    }
    fn ln(&self) -> Self {
        MPReal::ln(self)
    }
    fn powi(&self, n: i64) -> Self {
        MPReal::powi(self, n)
    }
    fn pow(&self, e: &Self) -> Self {
        MPReal::pow(self, e)
    }
    fn square(&self) -> Self {
        MPReal::square(self)
    }
    fn to_decimal(&self, digits: usize) -> String {
        MPReal::to_decimal(self, digits)
    }
    fn to_decimal_full(&self) -> String {
        MPReal::to_decimal_full(self)
    }
    fn parse(text: &str, p: Precision) -> Result<Self, ScalarError> {
        MPReal::parse(text, p)
    }
}

impl Scalar for MPComplex {
    const IS_COMPLEX: bool = true;

    fn from_real(x: MPReal) -> Self {
        MPComplex::from_real(x)
    }
    fn precision(&self) -> Precision {
        MPComplex::precision(self)
    }
    fn abs(&self) -> MPReal {
        MPComplex::abs(self)
    }
    fn is_zero(&self) -> bool {
        MPComplex::is_zero(self)
    }
    fn is_finite(&self) -> bool {
        MPComplex::is_finite(self)
    }
    fn is_nan(&self) -> bool {
        MPComplex::is_nan(self)
    }
    fn exp(&self) -> Self {
        MPComplex::exp(self)
    }
    fn sin(&self) -> Self {
        MPComplex::sin(self)
    }
    fn cos(&self) -> Self {
        MPComplex::cos(self)
    }
    fn sqrt(&self) -> Self {
        MPComplex::sqrt(self)
    }
    fn ln(&self) -> Self {
        MPComplex::ln(self)
    }
    fn powi(&self, n: i64) -> Self {
        MPComplex::powi(self, n)
    }
    fn pow(&self, e: &Self) -> Self {
        MPComplex::pow(self, e)
    }
    fn square(&self) -> Self {
        MPComplex::square(self)
    }
    fn to_decimal(&self, digits: usize) -> String {
        MPComplex::to_decimal(self, digits)
    }
    fn to_decimal_full(&self) -> String {
        MPComplex::to_decimal_full(self)
    }
    fn parse(text: &str, p: Precision) -> Result<Self, ScalarError> {
        MPComplex::parse(text, p)
    }
}

/// `arg(z)` in `(-π, π]`.
pub fn phase(z: &MPComplex) -> Result<MPReal, ScalarError> {
    z.phase()
}

/// `log10|x|` for either scalar kind; zero maps to negative infinity.
pub fn log10_abs<S: Scalar>(x: &S) -> MPReal {
    x.log10_abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(d: u32) -> Precision {
        Precision::digits_const(d)
    }

    fn close(a: &MPReal, b: &MPReal, tol: &MPReal) -> bool {
        (a - b).abs() <= *tol
    }

    #[test]
    fn precision_rejects_small() {
        assert_eq!(Precision::new(9), Err(ScalarError::PrecisionTooSmall(9)));
        assert!(Precision::new(10).is_ok());
    }

    #[test]
    fn bits_include_guard() {
        assert_eq!(p(40).bits(), 133 + 32);
        assert_eq!(p(1000).bits(), 3322 + 32);
        for d in [10, 34, 40, 50, 1000, 1624, 5000] {
            assert_eq!(Precision::from_bits(p(d).bits()).digits(), d);
        }
    }

    #[test]
    fn phase_examples() {
        let q = p(30);
        let pi = MPReal::pi(q);
        let tol = q.decimal_ulp();
        assert!(MPComplex::from_f64(1.0, 0.0, q).phase().unwrap().is_zero());
        let half = &pi / MPReal::from_i64(2, q);
        assert!(close(&MPComplex::from_f64(0.0, 1.0, q).phase().unwrap(), &half, &tol));
        assert_eq!(MPComplex::from_f64(-1.0, 0.0, q).phase().unwrap(), pi);
        // negative zero imaginary part stays on the +π side
        let z = MPComplex::new(MPReal::from_i64(-1, q), -MPReal::zero(q));
        assert_eq!(z.phase().unwrap(), pi);
        assert_eq!(MPComplex::from_f64(0.0, 0.0, q).phase(), Err(ScalarError::UndefinedPhase));
    }

    #[test]
    fn log10_abs_examples() {
        let q = p(40);
        let tol = q.decimal_ulp();
        assert!(close(&MPReal::from_i64(100, q).log10_abs(), &MPReal::from_i64(2, q), &tol));
        let tiny = q.pow10(-594);
        assert!(close(&tiny.log10_abs(), &MPReal::from_i64(-594, q), &(tol.clone() * MPReal::from_i64(1000, q))));
        let z = MPComplex::from_f64(3.0, 4.0, q);
        let want = MPReal::from_i64(5, q).log10();
        assert!(close(&log10_abs(&z), &want, &tol));
        assert!((want.to_f64() - 0.69897).abs() < 1e-5);
        let zero = MPReal::zero(q).log10_abs();
        assert!(zero.is_infinite() && zero.is_sign_negative());
    }

    #[test]
    fn overflow_becomes_infinity() {
        let q = Precision::quad();
        let big = MPReal::from_i64(20000, q).exp();
        assert!(big.is_infinite());
        let small = MPReal::from_i64(-20000, q).exp();
        assert!(small.is_zero());
        let nan = &big - &big;
        assert!(nan.is_nan());
        // wider precisions widen the range
        assert!(MPReal::from_i64(20000, p(1624)).exp().is_finite());
    }

    #[test]
    fn decimal_rendering() {
        let q = p(20);
        assert_eq!(MPReal::parse("2.5", q).unwrap().to_decimal(4), "2.500");
        assert_eq!(MPReal::parse("-123456", q).unwrap().to_decimal(6), "-123456");
        assert_eq!(MPReal::parse("1234567", q).unwrap().to_decimal(4), "1.235e+0006");
        assert_eq!(MPReal::parse("0.00012", q).unwrap().to_decimal(3), "0.000120");
        assert_eq!(MPReal::parse("1.7383e-1622", p(40)).unwrap().to_decimal(5), "1.7383e-1622");
        assert_eq!(MPReal::parse("1e-7", q).unwrap().to_decimal(1), "1e-0007");
        assert_eq!(MPReal::zero(q).to_decimal(3), "0.00");
        assert_eq!(MPReal::nan(q).to_decimal(3), "nan");
        assert_eq!(MPReal::neg_infinity(q).to_decimal(3), "-inf");
        assert_eq!(MPReal::parse("100", q).unwrap().to_decimal(2), "100");
    }

    #[test]
    fn parse_rejects_junk() {
        let q = p(20);
        assert!(MPReal::parse("", q).is_err());
        assert!(MPReal::parse("abc", q).is_err());
        assert!(MPReal::parse("@inf@", q).is_err());
        assert!(MPReal::parse("nan", q).unwrap().is_nan());
    }

    #[test]
    fn complex_parse_forms() {
        let q = p(20);
        let c = |s| MPComplex::parse(s, q).unwrap();
        assert_eq!(c("1"), MPComplex::from_f64(1.0, 0.0, q));
        assert_eq!(c("2i"), MPComplex::from_f64(0.0, 2.0, q));
        assert_eq!(c("-i"), MPComplex::from_f64(0.0, -1.0, q));
        assert_eq!(c("1.5-0.25i"), MPComplex::from_f64(1.5, -0.25, q));
        let z = c("-1e-3+2e+1i");
        assert_eq!(z.re, MPReal::parse("-0.001", q).unwrap());
        assert_eq!(z.im, MPReal::from_i64(20, q));
        assert_eq!(c(" 3 + 4 i "), MPComplex::from_f64(3.0, 4.0, q));
        assert!(MPComplex::parse("1+xi", q).is_err());
    }

    #[test]
    fn complex_functions_match_identities() {
        let q = p(50);
        let tol = q.decimal_ulp() * MPReal::from_i64(100, q);
        let z = MPComplex::from_f64(0.7, -1.3, q);
        // sin^2 + cos^2 = 1
        let s = z.sin();
        let c = z.cos();
        let one = s.square() + &c.square();
        assert!(close(&one.re, &MPReal::one(q), &tol) && one.im.abs() <= tol);
        // exp(ln z) = z
        let back = z.ln().exp();
        assert!((back - &z).abs() <= tol);
        // sqrt(z)^2 = z, principal branch has re >= 0
        let r = z.sqrt();
        assert!(!r.re.is_sign_negative());
        assert!((r.square() - &z).abs() <= tol);
        // powi vs repeated multiplication
        let cube = z.clone() * &z * &z;
        assert!((z.powi(3) - &cube).abs() <= tol);
        assert!((z.powi(-2) * &z.square() - &MPComplex::from_real(MPReal::one(q))).abs() <= tol);
    }

    #[test]
    fn complex_division_by_zero_is_nan_free_for_real_divisors() {
        let q = p(20);
        let z = MPComplex::from_f64(1.0, 1.0, q);
        let zero = MPComplex::from_f64(0.0, 0.0, q);
        let r = z / &zero;
        assert!(!r.is_finite());
        let r = zero.clone() / &zero;
        assert!(r.is_nan());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn decimal_round_trip(m in -1.0e9f64..1.0e9, e in -400i64..400, d in 10u32..200) {
            let q = p(d);
            let x = MPReal::from_f64(m, q) * q.pow10(e).sqrt();
            let text = x.to_decimal_full();
            let back = MPReal::parse(&text, q).unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn trig_identity(v in -50.0f64..50.0, d in 10u32..300) {
            let q = p(d);
            let x = MPReal::from_f64(v, q) / MPReal::from_i64(7, q);
            let (s, c) = x.sin_cos();
            let lhs = s.square() + c.square();
            let tol = q.decimal_ulp() * MPReal::from_i64(4, q);
            prop_assert!(close(&lhs, &MPReal::one(q), &tol));
        }

        #[test]
        fn raising_precision_agrees_below_lower_digits(v in 0.1f64..20.0, d in 10u32..120) {
            let lo = p(d);
            let hi = p(d + 40);
            let f = |q: Precision| {
                let x = MPReal::from_f64(v, q) / MPReal::from_i64(3, q);
                (x.exp() * x.sin()) / (x.square() + MPReal::one(q)).sqrt()
            };
            let a = f(lo);
            let b = f(hi);
            let scale = b.abs().max(MPReal::one(hi));
            prop_assert!((a.with_precision(hi) - &b).abs() <= lo.decimal_ulp() * scale);
        }
    }
}
