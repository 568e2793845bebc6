//! Scalar coefficients: exact complex rationals and double precision complexes.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;
/// Exact complex rational `p + q i`.
pub type QC = Complex<BigRational>;
pub type C64 = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Exact,
    Float,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Exact => write!(f, "exact"),
            Mode::Float => write!(f, "float"),
        }
    }
}

/// Field operations shared by both coefficient modes.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    const MODE: Mode;

    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_rat(q: &Rat) -> Self;
    fn from_qc(q: &QC) -> Self;
    fn imag_unit() -> Self;
    fn inv(&self) -> Option<Self>;
    fn to_c64(&self) -> C64;
    /// Exact value when available.
    fn to_qc(&self) -> Option<QC>;
    fn from_c64(z: C64) -> Option<Self>;

    fn from_i64(n: i64) -> Self {
        Self::from_ratio(n, 1)
    }

    fn magnitude(&self) -> f64 {
        self.to_c64().norm()
    }

    fn div(&self, other: &Self) -> Option<Self> {
        other.inv().map(|i| self.clone() * i)
    }

    fn powi(&self, e: i64) -> Option<Self> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut e = e.unsigned_abs();
        let mut acc = Self::one();
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b.clone();
            }
            e >>= 1;
            if e > 0 {
                b = b.clone() * b;
            }
        }
        Some(acc)
    }

    /// Zero test used by valuation queries.  Exact mode compares exactly;
    /// float mode treats magnitudes at or below `floor` as zero.
    fn negligible(&self, floor: f64) -> bool {
        match Self::MODE {
            Mode::Exact => self.is_zero(),
            Mode::Float => self.magnitude() <= floor,
        }
    }
}

fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

fn rat_to_f64(q: &Rat) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Shift both parts down so the quotient is representable.
            let nb = q.numer().bits() as i64;
            let db = q.denom().bits() as i64;
            let shift = (nb.max(db) - 1000).max(0) as usize;
            let n = (q.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (q.denom() >> shift).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

impl Scalar for QC {
    const MODE: Mode = Mode::Exact;

    fn from_ratio(num: i64, den: i64) -> Self {
        Complex::new(rat(num, den), Rat::zero())
    }
    fn from_rat(q: &Rat) -> Self {
        Complex::new(q.clone(), Rat::zero())
    }
    fn from_qc(q: &QC) -> Self {
        q.clone()
    }
    fn imag_unit() -> Self {
        Complex::new(Rat::zero(), Rat::one())
    }
    fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            let d = self.re.clone() * self.re.clone() + self.im.clone() * self.im.clone();
            Some(Complex::new(self.re.clone() / d.clone(), -self.im.clone() / d))
        }
    }
    fn to_c64(&self) -> C64 {
        C64::new(rat_to_f64(&self.re), rat_to_f64(&self.im))
    }
    fn to_qc(&self) -> Option<QC> {
        Some(self.clone())
    }
    fn from_c64(z: C64) -> Option<Self> {
        Some(Complex::new(Rat::from_float(z.re)?, Rat::from_float(z.im)?))
    }
}

impl Scalar for C64 {
    const MODE: Mode = Mode::Float;

    fn from_ratio(num: i64, den: i64) -> Self {
        C64::new(num as f64 / den as f64, 0.0)
    }
    fn from_rat(q: &Rat) -> Self {
        C64::new(rat_to_f64(q), 0.0)
    }
    fn from_qc(q: &QC) -> Self {
        q.to_c64()
    }
    fn imag_unit() -> Self {
        C64::new(0.0, 1.0)
    }
    fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(C64::new(1.0, 0.0) / *self)
        }
    }
    fn to_c64(&self) -> C64 {
        *self
    }
    fn to_qc(&self) -> Option<QC> {
        None
    }
    fn from_c64(z: C64) -> Option<Self> {
        Some(z)
    }
}

/// A coefficient whose mode is only known at run time.
#[derive(Clone, Debug, PartialEq)]
pub enum Coeff {
    Exact(QC),
    Float(C64),
}

impl Coeff {
    pub fn mode(&self) -> Mode {
        match self {
            Coeff::Exact(_) => Mode::Exact,
            Coeff::Float(_) => Mode::Float,
        }
    }

    pub fn of<S: Scalar>(s: &S) -> Coeff {
        match s.to_qc() {
            Some(q) => Coeff::Exact(q),
            None => Coeff::Float(s.to_c64()),
        }
    }

    pub fn to_c64(&self) -> C64 {
        match self {
            Coeff::Exact(q) => q.to_c64(),
            Coeff::Float(z) => *z,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coeff::Exact(q) => q.is_zero(),
            Coeff::Float(z) => z.is_zero(),
        }
    }

    fn combine(
        &self,
        other: &Coeff,
        fq: impl Fn(&QC, &QC) -> Option<QC>,
        ff: impl Fn(C64, C64) -> Option<C64>,
    ) -> Result<Coeff> {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => fq(a, b)
                .map(Coeff::Exact)
                .ok_or(Error::Invalid("division by zero".into())),
            (Coeff::Float(a), Coeff::Float(b)) => ff(*a, *b)
                .map(Coeff::Float)
                .ok_or(Error::Invalid("division by zero".into())),
            _ => Err(Error::ModeMismatch),
        }
    }

    pub fn try_add(&self, o: &Coeff) -> Result<Coeff> {
        self.combine(o, |a, b| Some(a + b), |a, b| Some(a + b))
    }
    pub fn try_sub(&self, o: &Coeff) -> Result<Coeff> {
        self.combine(o, |a, b| Some(a - b), |a, b| Some(a - b))
    }
    pub fn try_mul(&self, o: &Coeff) -> Result<Coeff> {
        self.combine(o, |a, b| Some(a * b), |a, b| Some(a * b))
    }
    pub fn try_div(&self, o: &Coeff) -> Result<Coeff> {
        self.combine(o, Scalar::div, |a, b| Scalar::div(&a, &b))
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::Exact(q) => write!(f, "{}", fmt_qc(q)),
            Coeff::Float(z) => write!(f, "{}", fmt_c64(*z)),
        }
    }
}

/// `a`, `a/b`, `i`, `-3/2*i`, `1/2+3*i`.
pub fn fmt_qc(q: &QC) -> String {
    let re = &q.re;
    let im = &q.im;
    if im.is_zero() {
        return re.to_string();
    }
    let im_abs = im.abs();
    let im_part = if im_abs.is_one() {
        "i".to_string()
    } else {
        format!("{}*i", im_abs)
    };
    if re.is_zero() {
        if im.is_negative() {
            format!("-{im_part}")
        } else {
            im_part
        }
    } else {
        let sign = if im.is_negative() { "-" } else { "+" };
        format!("{re}{sign}{im_part}")
    }
}

pub fn fmt_c64(z: C64) -> String {
    if z.im == 0.0 {
        format!("{:.17e}", z.re)
    } else {
        format!("{:.17e}{:+.17e}i", z.re, z.im)
    }
}

/// Closest complex rational to `z` with denominators bounded by `max_den`,
/// obtained from the continued fraction expansion of each part.
pub fn rationalize(z: C64, max_den: i64) -> Option<QC> {
    Some(Complex::new(
        rationalize_real(z.re, max_den)?,
        rationalize_real(z.im, max_den)?,
    ))
}

fn rationalize_real(x: f64, max_den: i64) -> Option<Rat> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut y = x;
    for _ in 0..64 {
        let a = y.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = y - a;
        if frac.abs() < 1e-12 {
            break;
        }
        y = 1.0 / frac;
    }
    if k1 == 0 {
        return None;
    }
    Some(Rat::new(BigInt::from(h1), BigInt::from(k1)))
}
