//! Configurable-precision real scalars and the complex values built on them.
//!
//! Every numerical routine in this crate is generic over [`Scalar`], so the
//! same code runs in hardware binary64 and in software multiprecision. The
//! multiprecision backend wraps MPFR floats; each value carries its own
//! precision, and mixed-precision operations round at the wider of the two.
//! New values (constants, parsed literals) are created at the per-thread
//! default set by [`set_precision_bits`].

use std::cell::Cell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::float::Constant;
use rug::ops::{CompleteRound, Pow};
use rug::Float;

/// Real scalar type usable throughout the expansion pipeline.
///
/// Implementations must be deterministic: the same operation on the same
/// operands yields the same bits, run after run.
pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Short backend name used in reports ("binary64", "mpfr").
    const BACKEND: &'static str;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(n: i64) -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Unit roundoff scale: 2^(1-p) for precision p. Tolerances derived from
    /// binary64 defaults are rescaled by `eps()/f64::EPSILON`.
    fn eps() -> Self;
    fn pi() -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sin_cos(self) -> (Self, Self);
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// Real power x^e; callers guarantee x > 0.
    fn powf(self, e: &Self) -> Self;
    fn powi(self, n: i32) -> Self;
    /// Nearest integer, ties away from zero.
    fn round(self) -> Self;
    fn is_finite(&self) -> bool;
    /// Decimal form that parses back to exactly the same value.
    fn to_decimal(&self) -> String;
    fn parse_decimal(s: &str) -> Option<Self>;

    fn two_pi() -> Self {
        Self::pi() * Self::from_i64(2)
    }
    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }
}

impl Scalar for f64 {
    const BACKEND: &'static str = "binary64";

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn eps() -> Self {
        f64::EPSILON
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powf(self, e: &Self) -> Self {
        f64::powf(self, *e)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn round(self) -> Self {
        f64::round(self)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn to_decimal(&self) -> String {
        format!("{self:?}")
    }
    fn parse_decimal(s: &str) -> Option<Self> {
        s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
    }
}

thread_local! {
    static MP_DEFAULT_BITS: Cell<u32> = const { Cell::new(256) };
}

/// Sets the per-thread precision used when constructing new [`MpReal`]s.
pub fn set_precision_bits(bits: u32) {
    assert!(bits >= 2, "precision must be at least 2 bits");
    MP_DEFAULT_BITS.with(|b| b.set(bits));
}

/// Current per-thread default precision for [`MpReal`] construction.
pub fn precision_bits() -> u32 {
    MP_DEFAULT_BITS.with(|b| b.get())
}

/// Multiprecision real backed by MPFR. Values remember their precision;
/// binary operations round at the wider operand.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct MpReal(Float);

impl MpReal {
    pub fn from_float(f: Float) -> Self {
        MpReal(f)
    }
    pub fn prec(&self) -> u32 {
        self.0.prec()
    }
    fn wider(a: &MpReal, b: &MpReal) -> u32 {
        a.0.prec().max(b.0.prec())
    }
    /// Number of significant decimal digits that guarantee exact binary
    /// round-trips at precision `bits`.
    pub fn digits_for(bits: u32) -> usize {
        (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2
    }
}

impl fmt::Display for MpReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.0.to_f64())
    }
}

impl Add for MpReal {
    type Output = MpReal;
    fn add(self, rhs: Self) -> Self {
        let p = Self::wider(&self, &rhs);
        MpReal((&self.0 + &rhs.0).complete(p))
    }
}
impl Sub for MpReal {
    type Output = MpReal;
    fn sub(self, rhs: Self) -> Self {
        let p = Self::wider(&self, &rhs);
        MpReal((&self.0 - &rhs.0).complete(p))
    }
}
impl Mul for MpReal {
    type Output = MpReal;
    fn mul(self, rhs: Self) -> Self {
        let p = Self::wider(&self, &rhs);
        MpReal((&self.0 * &rhs.0).complete(p))
    }
}
impl Div for MpReal {
    type Output = MpReal;
    fn div(self, rhs: Self) -> Self {
        let p = Self::wider(&self, &rhs);
        MpReal((&self.0 / &rhs.0).complete(p))
    }
}
impl Neg for MpReal {
    type Output = MpReal;
    fn neg(self) -> Self {
        MpReal(-self.0)
    }
}

impl Scalar for MpReal {
    const BACKEND: &'static str = "mpfr";

    fn zero() -> Self {
        MpReal(Float::with_val(precision_bits(), 0))
    }
    fn one() -> Self {
        MpReal(Float::with_val(precision_bits(), 1))
    }
    fn from_i64(n: i64) -> Self {
        MpReal(Float::with_val(precision_bits(), n))
    }
    fn from_f64(x: f64) -> Self {
        MpReal(Float::with_val(precision_bits(), x))
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn eps() -> Self {
        let p = precision_bits();
        MpReal(Float::with_val(p, 1) >> (p - 1))
    }
    fn pi() -> Self {
        MpReal(Float::with_val(precision_bits(), Constant::Pi))
    }
    fn sqrt(self) -> Self {
        MpReal(self.0.sqrt())
    }
    fn abs(self) -> Self {
        MpReal(self.0.abs())
    }
    fn sin(self) -> Self {
        MpReal(self.0.sin())
    }
    fn cos(self) -> Self {
        MpReal(self.0.cos())
    }
    fn sin_cos(self) -> (Self, Self) {
        let p = self.0.prec();
        let (s, c) = self.0.sin_cos(Float::new(p));
        (MpReal(s), MpReal(c))
    }
    fn exp(self) -> Self {
        MpReal(self.0.exp())
    }
    fn ln(self) -> Self {
        MpReal(self.0.ln())
    }
    fn powf(self, e: &Self) -> Self {
        let p = self.0.prec().max(e.0.prec());
        let mut base = self.0;
        base.set_prec(p);
        MpReal(base.pow(&e.0))
    }
    fn powi(self, n: i32) -> Self {
        MpReal(self.0.pow(n))
    }
    fn round(self) -> Self {
        MpReal(self.0.round())
    }
    fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
    fn to_decimal(&self) -> String {
        if self.0.is_zero() {
            return "0".to_string();
        }
        self.0
            .to_string_radix(10, Some(Self::digits_for(self.0.prec())))
    }
    fn parse_decimal(s: &str) -> Option<Self> {
        let parsed = Float::parse(s.trim()).ok()?;
        let v = Float::with_val(precision_bits(), parsed);
        v.is_finite().then_some(MpReal(v))
    }
}

/// Complex number over a [`Scalar`]; plain Cartesian layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Cplx<T: Scalar> {
    pub re: T,
    pub im: T,
}

impl<T: Scalar> Cplx<T> {
    pub fn new(re: T, im: T) -> Self {
        Cplx { re, im }
    }
    pub fn zero() -> Self {
        Cplx::new(T::zero(), T::zero())
    }
    pub fn one() -> Self {
        Cplx::new(T::one(), T::zero())
    }
    pub fn from_re(re: T) -> Self {
        Cplx::new(re, T::zero())
    }
    /// e^{it}.
    pub fn expi(t: T) -> Self {
        let (s, c) = t.sin_cos();
        Cplx::new(c, s)
    }
    pub fn conj(&self) -> Self {
        Cplx::new(self.re.clone(), -self.im.clone())
    }
    /// Multiplication by i (exact: swaps parts and negates one sign).
    pub fn mul_i(&self) -> Self {
        Cplx::new(-self.im.clone(), self.re.clone())
    }
    pub fn scale(&self, s: &T) -> Self {
        Cplx::new(self.re.clone() * s.clone(), self.im.clone() * s.clone())
    }
    pub fn div_re(&self, s: &T) -> Self {
        Cplx::new(self.re.clone() / s.clone(), self.im.clone() / s.clone())
    }
    pub fn abs_sq(&self) -> T {
        self.re.clone() * self.re.clone() + self.im.clone() * self.im.clone()
    }
    pub fn abs(&self) -> T {
        self.abs_sq().sqrt()
    }
    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl<T: Scalar> Add for Cplx<T> {
    type Output = Cplx<T>;
    fn add(self, rhs: Self) -> Self {
        Cplx::new(self.re + rhs.re, self.im + rhs.im)
    }
}
impl<T: Scalar> Sub for Cplx<T> {
    type Output = Cplx<T>;
    fn sub(self, rhs: Self) -> Self {
        Cplx::new(self.re - rhs.re, self.im - rhs.im)
    }
}
impl<T: Scalar> Mul for Cplx<T> {
    type Output = Cplx<T>;
    fn mul(self, rhs: Self) -> Self {
        let re = self.re.clone() * rhs.re.clone() - self.im.clone() * rhs.im.clone();
        let im = self.re * rhs.im + self.im * rhs.re;
        Cplx::new(re, im)
    }
}
impl<T: Scalar> Neg for Cplx<T> {
    type Output = Cplx<T>;
    fn neg(self) -> Self {
        Cplx::new(-self.re, -self.im)
    }
}

/// Ratio of the working roundoff to binary64 roundoff; multiplies tolerances
/// that were calibrated for binary64.
pub fn eps_ratio<T: Scalar>() -> f64 {
    let r = T::eps().to_f64() / f64::EPSILON;
    if r.is_finite() && r > 0.0 {
        r
    } else {
        // Working precision so high that eps underflows binary64: any
        // derived tolerance collapses to the smallest positive double.
        f64::MIN_POSITIVE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_decimal_round_trip() {
        for &x in &[0.1, -3.5e-17, 1.0, 12345.6789, 2.0_f64.powi(-40)] {
            let s = x.to_decimal();
            assert_eq!(f64::parse_decimal(&s), Some(x), "round trip of {s}");
        }
    }

    #[test]
    fn mp_decimal_round_trip() {
        set_precision_bits(192);
        let x = MpReal::pi() / MpReal::from_i64(7);
        let s = x.to_decimal();
        let y = MpReal::parse_decimal(&s).unwrap();
        assert_eq!(x, y, "192-bit round trip through {s}");
        assert_eq!(s, y.to_decimal(), "re-serialization is the identity");
    }

    #[test]
    fn mp_zero_round_trip() {
        set_precision_bits(128);
        let z = MpReal::zero();
        assert_eq!(MpReal::parse_decimal(&z.to_decimal()), Some(z));
    }

    #[test]
    fn mp_precision_propagates_to_wider() {
        set_precision_bits(64);
        let narrow = MpReal::one();
        set_precision_bits(200);
        let wide = MpReal::pi();
        assert_eq!((narrow.clone() + wide.clone()).prec(), 200);
        assert_eq!((wide * narrow).prec(), 200);
        set_precision_bits(256);
    }

    #[test]
    fn mp_trig_matches_f64_at_53_bits() {
        set_precision_bits(53);
        let x = MpReal::from_f64(0.7331);
        assert_eq!(x.clone().sin().to_f64(), 0.7331_f64.sin());
        assert_eq!(x.cos().to_f64(), 0.7331_f64.cos());
        set_precision_bits(256);
    }

    #[test]
    fn expi_unit_modulus() {
        let z = Cplx::<f64>::expi(1.234);
        assert!((z.abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complex_field_identities() {
        let a = Cplx::new(1.5, -2.0);
        let b = Cplx::new(-0.25, 3.0);
        let ab = a.clone() * b.clone();
        let ba = b * a.clone();
        assert_eq!(ab, ba);
        assert_eq!(a.mul_i(), Cplx::new(2.0, 1.5));
    }

    #[test]
    fn eps_ratio_is_one_for_f64() {
        assert_eq!(eps_ratio::<f64>(), 1.0);
    }
}
