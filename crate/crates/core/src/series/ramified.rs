//! Ramified logarithmic series
//!
//! ```text
//!     sum_{p,k} z^(p/n) w^k L_{p,k}(t),    t = (log z)^(1/n)
//! ```
//!
//! with `L_{p,k}` a [`Laurent1`] in `t`.  Truncation is by the weighted
//! degree `p + omega*k`, where `omega` is the weight of `w` measured in units
//! of `1/n`.  A series without `w` terms is the one-variable case.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_integer::Integer;

use super::laurent::Laurent1;
use super::poly2::{binomial_coeffs, Poly2};
use super::scalar::{Scalar, C64};
use crate::error::{Error, Result};

/// Branch of the logarithm used for numeric evaluation:
/// `arg z` is taken in `(theta0 - pi, theta0 + pi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub theta0: f64,
}

impl Default for Branch {
    fn default() -> Self {
        Branch { theta0: 0.0 }
    }
}

impl Branch {
    pub fn new(theta0: f64) -> Self {
        Branch { theta0 }
    }

    pub fn arg(&self, z: C64) -> f64 {
        let mut a = z.im.atan2(z.re);
        let hi = self.theta0 + PI;
        while a > hi {
            a -= 2.0 * PI;
        }
        while a <= hi - 2.0 * PI {
            a += 2.0 * PI;
        }
        a
    }

    /// True when `z` sits on the cut, up to a relative angular tolerance.
    pub fn on_cut(&self, z: C64) -> bool {
        let a = self.arg(z);
        (a - (self.theta0 + PI)).abs() < 1e-14 || (a - (self.theta0 - PI)).abs() < 1e-14
    }

    pub fn log(&self, z: C64) -> C64 {
        C64::new(z.norm().ln(), self.arg(z))
    }

    /// `z^(p/n)` on this branch.
    pub fn zpow(&self, z: C64, p: i64, n: u32) -> C64 {
        (self.log(z) * (p as f64 / n as f64)).exp()
    }

    /// `(log z)^(1/n)`.  The root is the one with `arg(log z)` taken in
    /// `(0, 2 pi]`, so that it is continuous across `0 < z < 1`.
    pub fn t(&self, z: C64, n: u32) -> C64 {
        log_root(self.log(z), n)
    }
}

/// `L^(1/n)` with `arg L` measured in `(0, 2 pi]`.
pub fn log_root(l: C64, n: u32) -> C64 {
    let mut a = l.im.atan2(l.re);
    if a <= 0.0 {
        a += 2.0 * PI;
    }
    C64::from_polar(l.norm().powf(1.0 / n as f64), a / n as f64)
}

#[derive(Clone, PartialEq)]
pub struct RamifiedLogSeries<S> {
    ram: u32,
    omega: i64,
    terms: BTreeMap<(i64, u32), Laurent1<S>>,
    ptrunc: i64,
}

impl<S: Scalar> RamifiedLogSeries<S> {
    pub fn zero(ram: u32, omega: i64, ptrunc: i64) -> Self {
        assert!(ram >= 1 && omega >= 1);
        RamifiedLogSeries {
            ram,
            omega,
            terms: BTreeMap::new(),
            ptrunc,
        }
    }

    pub fn one(ram: u32, omega: i64, ptrunc: i64) -> Self {
        Self::term(Laurent1::one(), 0, 0, ram, omega, ptrunc)
    }

    /// `z^(p/n) w^k L(t)`.
    pub fn term(l: Laurent1<S>, p: i64, k: u32, ram: u32, omega: i64, ptrunc: i64) -> Self {
        let mut s = Self::zero(ram, omega, ptrunc);
        s.add_laurent(p, k, l);
        s
    }

    /// `c z^(p/n) w^k t^e`.
    pub fn monomial(c: S, p: i64, k: u32, e: i64, ram: u32, omega: i64, ptrunc: i64) -> Self {
        Self::term(Laurent1::monomial(c, e), p, k, ram, omega, ptrunc)
    }

    /// Embeds a bivariate series; `z^i w^j` becomes `p = n i`.
    pub fn from_poly2(f: &Poly2<S>, ram: u32, omega: i64) -> Self {
        let n = ram as i64;
        let ptrunc = n.min(omega) * (f.trunc() as i64 + 1) - 1;
        let mut s = Self::zero(ram, omega, ptrunc);
        for ((i, j), c) in f.terms() {
            s.add_laurent(n * *i as i64, *j, Laurent1::constant(c.clone()));
        }
        s
    }

    pub fn ram(&self) -> u32 {
        self.ram
    }

    pub fn omega(&self) -> i64 {
        self.omega
    }

    pub fn ptrunc(&self) -> i64 {
        self.ptrunc
    }

    pub fn weight(&self, p: i64, k: u32) -> i64 {
        p + self.omega * k as i64
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(i64, u32), &Laurent1<S>)> {
        self.terms.iter()
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, p: i64, k: u32) -> Laurent1<S> {
        self.terms.get(&(p, k)).cloned().unwrap_or_else(Laurent1::exact_zero)
    }

    /// Adds `z^(p/n) w^k L` when its weight is within the truncation.
    pub fn add_laurent(&mut self, p: i64, k: u32, l: Laurent1<S>) {
        if self.weight(p, k) > self.ptrunc {
            return;
        }
        let merged = match self.terms.remove(&(p, k)) {
            Some(old) => old.add(&l),
            None => l,
        };
        if !merged.is_zero() {
            self.terms.insert((p, k), merged);
        }
    }

    /// Lowers the truncation weight.
    pub fn truncate(&self, ptrunc: i64) -> Self {
        let ptrunc = ptrunc.min(self.ptrunc);
        let mut out = Self::zero(self.ram, self.omega, ptrunc);
        for ((p, k), l) in &self.terms {
            out.add_laurent(*p, *k, l.clone());
        }
        out
    }

    /// Smallest weight of a stored term, or `ptrunc + 1` when empty.
    pub fn weighted_valuation(&self) -> i64 {
        self.terms
            .keys()
            .map(|(p, k)| self.weight(*p, *k))
            .min()
            .unwrap_or(self.ptrunc + 1)
    }

    /// Smallest `p` among terms whose Laurent part is not negligible.
    pub fn z_valuation(&self, floor: f64) -> Option<i64> {
        self.terms
            .iter()
            .filter(|(_, l)| !l.negligible(floor))
            .map(|((p, _), _)| *p)
            .min()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|l| l.max_abs()).fold(0.0, f64::max)
    }

    /// Re-expresses the series with ramification `ram * m`.
    pub fn rescale_ram(&self, m: u32) -> Self {
        let m64 = m as i64;
        let mut out = Self::zero(self.ram * m, self.omega * m64, self.ptrunc * m64 + (m64 - 1));
        for ((p, k), l) in &self.terms {
            // t = (log z)^(1/n) = ((log z)^(1/nm))^m
            let lt = Laurent1::from_terms(
                l.terms().map(|(e, c)| (e * m64, c.clone())),
                if l.is_exact() {
                    l.depth()
                } else {
                    (l.depth() + 1) * m64 - 1
                },
            );
            out.add_laurent(p * m64, *k, lt);
        }
        out
    }

    fn aligned(&self, other: &Self) -> (Self, Self) {
        if self.ram == other.ram {
            return (self.clone(), other.clone());
        }
        let l = self.ram.lcm(&other.ram);
        (self.rescale_ram(l / self.ram), other.rescale_ram(l / other.ram))
    }

    fn check_omega(&self, other: &Self) {
        assert_eq!(
            self.omega * other.ram as i64,
            other.omega * self.ram as i64,
            "weights of w disagree"
        );
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> RamifiedLogSeries<T> {
        let mut out = RamifiedLogSeries::zero(self.ram, self.omega, self.ptrunc);
        for ((p, k), l) in &self.terms {
            out.add_laurent(*p, *k, l.map(f));
        }
        out
    }

    pub fn to_float(&self) -> RamifiedLogSeries<C64> {
        self.map(|c| c.to_c64())
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = Self::zero(self.ram, self.omega, self.ptrunc);
        for ((p, k), l) in &self.terms {
            out.add_laurent(*p, *k, l.scale(c));
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&(-S::one()))
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.ram != other.ram {
            let (a, b) = self.aligned(other);
            return a.add(&b);
        }
        self.check_omega(other);
        let mut out = self.truncate(other.ptrunc);
        for ((p, k), l) in &other.terms {
            out.add_laurent(*p, *k, l.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.ram != other.ram {
            let (a, b) = self.aligned(other);
            return a.mul(&b);
        }
        self.check_omega(other);
        let ptrunc = (self.ptrunc + other.weighted_valuation()).min(other.ptrunc + self.weighted_valuation());
        let mut acc: BTreeMap<(i64, u32), Laurent1<S>> = BTreeMap::new();
        for ((p1, k1), l1) in &self.terms {
            for ((p2, k2), l2) in &other.terms {
                let (p, k) = (p1 + p2, k1 + k2);
                if self.weight(p, k) > ptrunc {
                    continue;
                }
                let prod = l1.mul(l2);
                match acc.get_mut(&(p, k)) {
                    Some(v) => *v = v.add(&prod),
                    None => {
                        acc.insert((p, k), prod);
                    }
                }
            }
        }
        let mut out = Self::zero(self.ram, self.omega, ptrunc);
        for ((p, k), l) in acc {
            out.add_laurent(p, k, l);
        }
        out
    }

    /// Multiplication by `z^(p/n)`.
    pub fn mul_zpow(&self, p: i64) -> Self {
        let mut out = Self::zero(self.ram, self.omega, self.ptrunc + p);
        for ((q, k), l) in &self.terms {
            out.add_laurent(q + p, *k, l.clone());
        }
        out
    }

    /// Multiplication by `w^k`.
    pub fn mul_wpow(&self, k: u32) -> Self {
        let mut out = Self::zero(self.ram, self.omega, self.ptrunc + self.omega * k as i64);
        for ((p, j), l) in &self.terms {
            out.add_laurent(*p, j + k, l.clone());
        }
        out
    }

    /// Multiplication by `t^e` (so `e = -n` divides by `log z`).
    pub fn mul_tpow(&self, e: i64) -> Self {
        let mut out = Self::zero(self.ram, self.omega, self.ptrunc);
        for ((p, k), l) in &self.terms {
            out.add_laurent(*p, *k, l.mul_tpow(e));
        }
        out
    }

    pub fn mul_laurent(&self, l: &Laurent1<S>) -> Self {
        let mut out = Self::zero(self.ram, self.omega, self.ptrunc);
        for ((p, k), m) in &self.terms {
            out.add_laurent(*p, *k, m.mul(l));
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        if e == 0 {
            return Self::one(self.ram, self.omega, self.ptrunc);
        }
        let mut out = self.clone();
        for _ in 1..e {
            out = out.mul(self);
        }
        out
    }

    /// Exact division by `z^(p/n)`; every stored term must have `z`-exponent
    /// at least `p`.
    pub fn div_zpow(&self, p: i64) -> Result<Self> {
        if let Some(((q, _), _)) = self.terms.iter().find(|((q, _), _)| *q < p) {
            return Err(Error::NotDivisible(format!(
                "term z^({q}/{}) is not divisible by z^({p}/{})",
                self.ram, self.ram
            )));
        }
        Ok(self.mul_zpow(-p))
    }

    /// Exact division by `w^k`.
    pub fn div_wpow(&self, k: u32) -> Result<Self> {
        let mut out = Self::zero(self.ram, self.omega, self.ptrunc - self.omega * k as i64);
        for ((p, j), l) in &self.terms {
            if *j < k {
                return Err(Error::NotDivisible(format!("term w^{j} is not divisible by w^{k}")));
            }
            out.add_laurent(*p, j - k, l.clone());
        }
        Ok(out)
    }

    /// Coefficient of `w^k` as a series in `z` alone.
    pub fn coeff_w(&self, k: u32) -> Self {
        let mut out = Self::zero(self.ram, self.omega, self.ptrunc - self.omega * k as i64);
        for ((p, j), l) in &self.terms {
            if *j == k {
                out.add_laurent(*p, 0, l.clone());
            }
        }
        out
    }

    pub fn max_wdeg(&self) -> u32 {
        self.terms.keys().map(|(_, k)| *k).max().unwrap_or(0)
    }

    /// Constant Laurent part at `z^0 w^0`.
    pub fn constant_part(&self) -> Laurent1<S> {
        self.coeff(0, 0)
    }

    fn require_positive(&self, op: &'static str) -> Result<()> {
        if self.terms.keys().any(|(p, k)| self.weight(*p, *k) <= 0) {
            return Err(Error::NonzeroConstantTerm { op });
        }
        Ok(())
    }

    /// `sum_j coeffs[j] u^j` for `u` of positive weight.
    fn power_series_in(&self, coeffs: &[S]) -> Self {
        let v = self.weighted_valuation().max(1);
        let mut out = Self::term(
            Laurent1::constant(coeffs[0].clone()),
            0,
            0,
            self.ram,
            self.omega,
            self.ptrunc,
        );
        let mut pw = Self::one(self.ram, self.omega, self.ptrunc);
        let mut j = 1usize;
        while (j as i64) * v <= self.ptrunc && j < coeffs.len() {
            pw = pw.mul(self);
            out = out.add(&pw.scale(&coeffs[j]));
            j += 1;
        }
        out
    }

    fn series_len(&self) -> usize {
        let v = self.weighted_valuation().max(1);
        (self.ptrunc.max(0) / v) as usize + 2
    }

    /// `log(1 + u)`.
    pub fn log1p(&self) -> Result<Self> {
        self.require_positive("log1p_series")?;
        let len = self.series_len();
        let coeffs: Vec<S> = (0..len)
            .map(|j| {
                if j == 0 {
                    S::zero()
                } else {
                    S::from_ratio(if j % 2 == 1 { 1 } else { -1 }, j as i64)
                }
            })
            .collect();
        Ok(self.power_series_in(&coeffs))
    }

    /// `(1 + u)^(p/q)`.
    pub fn binomial(&self, p: i64, q: i64) -> Result<Self> {
        self.require_positive("ramified_pow")?;
        let coeffs = binomial_coeffs::<S>(p, q, self.series_len());
        Ok(self.power_series_in(&coeffs))
    }

    /// `s^(p/q)` for `s = 1 + (positive weight terms)`.
    pub fn pow_ratio(&self, p: i64, q: i64) -> Result<Self> {
        let c = self.constant_part();
        if !c.is_exact() || c.terms().count() != 1 || c.coeff(0) != S::one() {
            return Err(Error::NotAUnit { op: "ramified_pow" });
        }
        let u = self.sub(&Self::one(self.ram, self.omega, self.ptrunc));
        u.binomial(p, q).map_err(|_| Error::NotAUnit { op: "ramified_pow" })
    }

    /// `exp(u)` for `u` of positive weight.
    pub fn exp(&self) -> Result<Self> {
        self.require_positive("exp")?;
        let len = self.series_len();
        let mut coeffs = vec![S::one()];
        for j in 1..len {
            let prev = coeffs[j - 1].clone();
            coeffs.push(prev * S::from_ratio(1, j as i64));
        }
        Ok(self.power_series_in(&coeffs))
    }

    /// Substitutes `w := s`.  `s` may itself contain `w` (a new variable of
    /// the same weight); its weighted valuation must be at least `omega`.
    pub fn subst_w(&self, s: &Self) -> Result<Self> {
        if s.ram != self.ram {
            let (a, b) = self.aligned(s);
            return a.subst_w(&b);
        }
        self.check_omega(s);
        if s.weighted_valuation() < self.omega {
            return Err(Error::Invalid("substituted series has lower weight than w".into()));
        }
        let kmax = self.max_wdeg();
        let mut out = self.coeff_w(kmax);
        for k in (0..kmax).rev() {
            out = out.mul(s).add(&self.coeff_w(k));
        }
        Ok(out.truncate(self.ptrunc))
    }

    /// `g(z (1 + X))` for `g = self` free of `w`, where `X` has positive
    /// weight.  The logarithm is expanded as
    /// `(log z1)^(1/n) = t (1 + log(1+X) t^-n)^(1/n)` and each Laurent part is
    /// Taylor expanded in the increment of `t`.
    pub fn compose_z(&self, x: &Self) -> Result<Self> {
        if x.ram != self.ram {
            let (a, b) = self.aligned(x);
            return a.compose_z(&b);
        }
        self.check_omega(x);
        if self.max_wdeg() > 0 {
            return Err(Error::Invalid("compose_z expects a series in z alone".into()));
        }
        x.require_positive("compose_z")?;
        let n = self.ram as i64;
        let pmin = self.terms.keys().map(|(p, _)| *p).min().unwrap_or(0);
        let ptrunc = self.ptrunc.min(pmin + x.ptrunc);
        let x = x.truncate(ptrunc - pmin.min(0));
        let vx = x.weighted_valuation();
        let one = Self::one(self.ram, self.omega, x.ptrunc);

        // delta = t ((1 + y)^(1/n) - 1),  y = log(1 + X) / log z
        let y = x.log1p()?.mul_tpow(-n);
        let delta = y.binomial(1, n)?.sub(&one).mul_tpow(1);
        let vd = delta.weighted_valuation().max(vx);

        // powers delta^j / j!
        let mut dpows = vec![one.clone()];
        let mut j = 1i64;
        while (j * vd) + pmin <= ptrunc {
            let next = dpows.last().unwrap().mul(&delta).scale(&S::from_ratio(1, j));
            dpows.push(next);
            j += 1;
        }

        // (1 + X)^(1/n) and its powers
        let root = x.binomial(1, n)?;
        let root_inv = x.binomial(-1, n)?;
        let mut out = Self::zero(self.ram, self.omega, ptrunc);
        for ((p, _), l) in &self.terms {
            let p = *p;
            let factor = pow_signed(&root, &root_inv, p, &one);
            let mut taylor = Self::zero(self.ram, self.omega, ptrunc - p);
            let mut deriv = l.clone();
            for dj in &dpows {
                if deriv.is_zero() {
                    break;
                }
                taylor = taylor.add(&dj.mul_laurent(&deriv));
                deriv = deriv.derivative();
            }
            out = out.add(&factor.mul(&taylor).mul_zpow(p));
        }
        Ok(out.truncate(ptrunc))
    }

    /// Drops Laurent coefficients of magnitude at most `floor`.
    pub fn chop(&self, floor: f64) -> Self {
        let mut out = Self::zero(self.ram, self.omega, self.ptrunc);
        for ((p, k), l) in &self.terms {
            out.add_laurent(*p, *k, l.chop(floor));
        }
        out
    }

    /// Numeric value at `(z, w)` on the given branch.
    pub fn eval(&self, z: C64, w: C64, br: &Branch) -> C64 {
        let n = self.ram;
        let t = br.t(z, n);
        let logz = br.log(z);
        let mut acc = C64::new(0.0, 0.0);
        for ((p, k), l) in &self.terms {
            let zp = (logz * (*p as f64 / n as f64)).exp();
            acc += zp * w.powi(*k as i32) * l.eval(t);
        }
        acc
    }
}

fn pow_signed<S: Scalar>(
    root: &RamifiedLogSeries<S>,
    root_inv: &RamifiedLogSeries<S>,
    p: i64,
    one: &RamifiedLogSeries<S>,
) -> RamifiedLogSeries<S> {
    let base = if p >= 0 { root } else { root_inv };
    let mut acc = one.clone();
    for _ in 0..p.unsigned_abs() {
        acc = acc.mul(base);
    }
    acc
}

impl<S: Scalar> fmt::Debug for RamifiedLogSeries<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.ram;
        for ((p, k), l) in &self.terms {
            writeln!(f, "z^({p}/{n}) w^{k} [{:?}]", l)?;
        }
        write!(f, "+ O(weight {})", self.ptrunc + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::scalar::QC;

    type R = RamifiedLogSeries<C64>;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn binomial_half_power() {
        // (1 + z)^(1/2) with z = z^(2/2)
        let u = R::monomial(c(1.0), 2, 0, 0, 2, 2, 8);
        let s = u.binomial(1, 2).unwrap();
        assert!((s.coeff(0, 0).coeff(0) - c(1.0)).norm() < 1e-15);
        assert!((s.coeff(2, 0).coeff(0) - c(0.5)).norm() < 1e-15);
        assert!((s.coeff(4, 0).coeff(0) - c(-0.125)).norm() < 1e-15);
        let one = R::one(2, 2, 8);
        let e0 = one.add(&u).pow_ratio(0, 1).unwrap();
        assert_eq!(e0.len(), 1);
        let e1 = one.add(&u).pow_ratio(1, 1).unwrap();
        assert_eq!(e1, one.add(&u));
    }

    #[test]
    fn not_a_unit() {
        let s = R::monomial(c(2.0), 0, 0, 0, 1, 1, 5);
        assert!(matches!(s.pow_ratio(1, 2), Err(Error::NotAUnit { .. })));
    }

    #[test]
    fn evaluation_on_branch() {
        let br = Branch::default();
        let z = C64::new(0.01, 0.003);
        let s = R::monomial(c(2.0), 3, 1, -1, 2, 2, 20);
        let w = C64::new(0.2, 0.1);
        let want = c(2.0) * br.zpow(z, 3, 2) * w / br.t(z, 2);
        assert!((s.eval(z, w, &br) - want).norm() < 1e-15);
    }

    #[test]
    fn compose_z_matches_direct_evaluation() {
        // g(z) = z^(1/2) t^-1 + z t^2,  X = z^(1/2) + 3 z
        let n = 2;
        let mut g = R::monomial(c(1.0), 1, 0, -1, n, 2, 12);
        g = g.add(&R::monomial(c(1.0), 2, 0, 2, n, 2, 12));
        let x = R::monomial(c(1.0), 1, 0, 0, n, 2, 12).add(&R::monomial(c(3.0), 2, 0, 0, n, 2, 12));
        let comp = g.compose_z(&x).unwrap();
        let br = Branch::default();
        let z = C64::new(1e-6, 2e-7);
        let z1 = z * (c(1.0) + x.eval(z, c(0.0), &br));
        let want = g.eval(z1, c(0.0), &br);
        let got = comp.eval(z, c(0.0), &br);
        assert!((got - want).norm() < 1e-9 * want.norm(), "{got} vs {want}");
    }

    #[test]
    fn rescale_is_value_preserving() {
        let s = R::monomial(c(1.5), 1, 0, 1, 2, 2, 10);
        let r = s.rescale_ram(3);
        let br = Branch::default();
        let z = C64::new(0.02, -0.01);
        assert!((s.eval(z, c(0.0), &br) - r.eval(z, c(0.0), &br)).norm() < 1e-14);
    }

    #[test]
    fn exact_log_exp_roundtrip() {
        let u = RamifiedLogSeries::<QC>::monomial(QC::from_i64(1), 1, 0, 0, 1, 1, 6);
        let back = u.log1p().unwrap().exp().unwrap();
        let one = RamifiedLogSeries::<QC>::one(1, 1, 6);
        assert_eq!(back, one.add(&u));
    }
}
