//! Truncated bivariate series in `(z, w)`.
//!
//! A `Poly2` stores the coefficients of the monomials `z^i w^j` with
//! `i + j <= trunc`.  Coefficients of higher total degree are unknown, not
//! zero: every operation reports the degree up to which its output is valid.

use std::collections::BTreeMap;
use std::fmt;

use super::scalar::{fmt_c64, fmt_qc, Scalar, C64};
use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Poly2<S> {
    terms: BTreeMap<(u32, u32), S>,
    trunc: u32,
}

impl<S: Scalar> Poly2<S> {
    pub fn zero(trunc: u32) -> Self {
        Poly2 {
            terms: BTreeMap::new(),
            trunc,
        }
    }

    pub fn from_terms<I: IntoIterator<Item = ((u32, u32), S)>>(terms: I, trunc: u32) -> Self {
        let mut p = Self::zero(trunc);
        for ((i, j), c) in terms {
            p.add_term(i, j, c);
        }
        p
    }

    pub fn constant(c: S, trunc: u32) -> Self {
        Self::monomial(c, 0, 0, trunc)
    }

    pub fn one(trunc: u32) -> Self {
        Self::constant(S::one(), trunc)
    }

    pub fn monomial(c: S, i: u32, j: u32, trunc: u32) -> Self {
        let mut p = Self::zero(trunc);
        p.add_term(i, j, c);
        p
    }

    pub fn z(trunc: u32) -> Self {
        Self::monomial(S::one(), 1, 0, trunc)
    }

    pub fn w(trunc: u32) -> Self {
        Self::monomial(S::one(), 0, 1, trunc)
    }

    /// Adds `c z^i w^j`, dropping it silently when beyond the truncation.
    pub fn add_term(&mut self, i: u32, j: u32, c: S) {
        if i + j > self.trunc || c.is_zero() {
            return;
        }
        match self.terms.get_mut(&(i, j)) {
            Some(v) => {
                let s = v.clone() + c;
                if s.is_zero() {
                    self.terms.remove(&(i, j));
                } else {
                    *v = s;
                }
            }
            None => {
                self.terms.insert((i, j), c);
            }
        }
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    pub fn coeff(&self, i: u32, j: u32) -> S {
        self.terms.get(&(i, j)).cloned().unwrap_or_else(S::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &S)> {
        self.terms.iter()
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree of the highest stored term.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|(i, j)| i + j).max()
    }

    /// Lowers the truncation degree, discarding terms above it.
    pub fn truncate(&self, trunc: u32) -> Self {
        let trunc = trunc.min(self.trunc);
        Poly2 {
            terms: self
                .terms
                .iter()
                .filter(|((i, j), _)| i + j <= trunc)
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            trunc,
        }
    }

    /// Reinterprets the stored terms with a different truncation degree.
    /// Raising it is only sound when the caller knows the tail vanishes.
    pub fn with_trunc(&self, trunc: u32) -> Self {
        let mut p = self.truncate(trunc);
        p.trunc = trunc;
        p
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Poly2<T> {
        Poly2::from_terms(self.terms.iter().map(|(k, v)| (*k, f(v))), self.trunc)
    }

    pub fn to_float(&self) -> Poly2<C64> {
        self.map(|c| c.to_c64())
    }

    pub fn scale(&self, c: &S) -> Self {
        Poly2::from_terms(self.terms.iter().map(|(k, v)| (*k, v.clone() * c.clone())), self.trunc)
    }

    pub fn neg(&self) -> Self {
        Poly2 {
            terms: self.terms.iter().map(|(k, v)| (*k, -v.clone())).collect(),
            trunc: self.trunc,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.truncate(other.trunc);
        for ((i, j), c) in &other.terms {
            p.add_term(*i, *j, c.clone());
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Product truncated at the smaller of the two truncation degrees.
    pub fn mul(&self, other: &Self) -> Self {
        let trunc = self.trunc.min(other.trunc);
        let mut p = Self::zero(trunc);
        for ((i1, j1), a) in &self.terms {
            for ((i2, j2), b) in &other.terms {
                if i1 + j1 + i2 + j2 <= trunc {
                    p.add_term(i1 + i2, j1 + j2, a.clone() * b.clone());
                }
            }
        }
        p
    }

    /// Multiplication by `z^i w^j`; the known range grows with the degree.
    pub fn mul_monomial(&self, i: u32, j: u32) -> Self {
        let trunc = self.trunc + i + j;
        Poly2::from_terms(self.terms.iter().map(|((a, b), c)| ((a + i, b + j), c.clone())), trunc)
    }

    /// Exact division by `z^k`.
    pub fn div_z_pow(&self, k: u32) -> Result<Self> {
        self.div_monomial(k, 0)
    }

    /// Exact division by `z^i w^j`; the truncation degree drops by `i + j`.
    pub fn div_monomial(&self, i: u32, j: u32) -> Result<Self> {
        if self.trunc < i + j {
            return Err(Error::TruncationExhausted {
                op: "div_monomial",
                need: (i + j) as i64,
                have: self.trunc as i64,
            });
        }
        let mut out = Self::zero(self.trunc - i - j);
        for ((a, b), c) in &self.terms {
            if *a < i || *b < j {
                return Err(Error::NotDivisible(format!(
                    "term z^{a} w^{b} is not divisible by z^{i} w^{j}"
                )));
            }
            out.add_term(a - i, b - j, c.clone());
        }
        Ok(out)
    }

    /// Homogeneous part of total degree `d`.
    pub fn homogeneous(&self, d: u32) -> Self {
        Poly2::from_terms(
            self.terms
                .iter()
                .filter(|((i, j), _)| i + j == d)
                .map(|(k, v)| (*k, v.clone())),
            self.trunc,
        )
    }

    /// Least total degree of a stored term (`None` when zero to truncation).
    pub fn order(&self) -> Option<u32> {
        self.terms.keys().map(|(i, j)| i + j).min()
    }

    /// Largest `k` with `z^k` dividing every stored term.
    pub fn z_adic_valuation(&self) -> Option<u32> {
        self.terms.keys().map(|(i, _)| *i).min()
    }

    pub fn w_adic_valuation(&self) -> Option<u32> {
        self.terms.keys().map(|(_, j)| *j).min()
    }

    pub fn constant_term(&self) -> S {
        self.coeff(0, 0)
    }

    /// Coefficients of `w^j` in `p(0, w)`.
    pub fn restrict_z0(&self) -> BTreeMap<u32, S> {
        self.terms
            .iter()
            .filter(|((i, _), _)| *i == 0)
            .map(|((_, j), c)| (*j, c.clone()))
            .collect()
    }

    pub fn eval(&self, z: C64, w: C64) -> C64 {
        // Horner-free evaluation keeps the code obvious; degrees are small.
        let mut acc = C64::new(0.0, 0.0);
        for ((i, j), c) in &self.terms {
            acc += c.to_c64() * z.powu(*i) * w.powu(*j);
        }
        acc
    }

    pub fn eval_exact(&self, z: &S, w: &S) -> S {
        let mut acc = S::zero();
        for ((i, j), c) in &self.terms {
            acc = acc + c.clone() * z.powi(*i as i64).unwrap() * w.powi(*j as i64).unwrap();
        }
        acc
    }

    pub fn dz(&self) -> Self {
        let mut p = Self::zero(self.trunc.saturating_sub(1));
        for ((i, j), c) in &self.terms {
            if *i > 0 {
                p.add_term(i - 1, *j, c.clone() * S::from_i64(*i as i64));
            }
        }
        p
    }

    pub fn dw(&self) -> Self {
        let mut p = Self::zero(self.trunc.saturating_sub(1));
        for ((i, j), c) in &self.terms {
            if *j > 0 {
                p.add_term(*i, j - 1, c.clone() * S::from_i64(*j as i64));
            }
        }
        p
    }

    /// Inverse of a series with nonzero constant term, computed degree by
    /// degree from `sum_e a_e b_{d-e} = [d = 0]`.
    pub fn series_inverse(&self) -> Result<Self> {
        let c = self.constant_term();
        let cinv = c.inv().ok_or(Error::ZeroConstantTerm { op: "series_inverse" })?;
        let n = self.trunc;
        let parts: Vec<Self> = (0..=n).map(|d| self.homogeneous(d)).collect();
        let mut inv_parts: Vec<Self> = vec![Self::constant(cinv.clone(), n)];
        for d in 1..=n {
            let mut acc = Self::zero(n);
            for e in 1..=d {
                if parts[e as usize].is_zero() {
                    continue;
                }
                acc = acc.add(&parts[e as usize].mul(&inv_parts[(d - e) as usize]));
            }
            inv_parts.push(acc.scale(&(-cinv.clone())));
        }
        let mut out = Self::zero(n);
        for p in inv_parts {
            out = out.add(&p);
        }
        Ok(out)
    }

    /// `sum_k coeffs[k] u^k` for `u` without constant term.
    fn power_series_in(&self, coeffs: impl Fn(u32) -> S) -> Self {
        let n = self.trunc;
        let ord = self.order().unwrap_or(n + 1).max(1);
        let mut out = Self::constant(coeffs(0), n);
        let mut pw = Self::one(n);
        let mut k = 1;
        while k * ord <= n {
            pw = pw.mul(self);
            out = out.add(&pw.scale(&coeffs(k)));
            k += 1;
        }
        out
    }

    /// `log(1 + u) = u - u^2/2 + u^3/3 - ...`
    pub fn log1p(&self) -> Result<Self> {
        if !self.constant_term().is_zero() {
            return Err(Error::NonzeroConstantTerm { op: "log1p_series" });
        }
        Ok(self.power_series_in(|k| {
            if k == 0 {
                S::zero()
            } else {
                let s = if k % 2 == 1 { 1 } else { -1 };
                S::from_ratio(s, k as i64)
            }
        }))
    }

    /// `(1 + u)^(p/q)` by the binomial series; `self` is `u`.
    pub fn binomial(&self, p: i64, q: i64) -> Result<Self> {
        if !self.constant_term().is_zero() {
            return Err(Error::NotAUnit { op: "ramified_pow" });
        }
        let coeffs = binomial_coeffs::<S>(p, q, self.trunc as usize + 1);
        Ok(self.power_series_in(|k| coeffs[k as usize].clone()))
    }

    /// `s^(p/q)` for `s = 1 + (positive order terms)`.
    pub fn pow_ratio(&self, p: i64, q: i64) -> Result<Self> {
        if self.constant_term() != S::one() {
            return Err(Error::NotAUnit { op: "ramified_pow" });
        }
        self.sub(&Self::one(self.trunc)).binomial(p, q)
    }

    /// `self(g1, g2)` where `g1`, `g2` have no constant term.
    pub fn compose(&self, g1: &Self, g2: &Self) -> Result<Self> {
        if !g1.constant_term().is_zero() || !g2.constant_term().is_zero() {
            return Err(Error::DivergentComposition);
        }
        let m = g1.order().unwrap_or(u32::MAX).min(g2.order().unwrap_or(u32::MAX));
        let inner = g1.trunc.min(g2.trunc);
        let outer = if m == u32::MAX {
            u32::MAX
        } else {
            ((self.trunc as u64 + 1) * m as u64 - 1).min(u32::MAX as u64) as u32
        };
        let trunc = inner.min(outer);
        Ok(self.substitute(g1, g2, trunc))
    }

    /// Treats `self` as a complete polynomial and substitutes arbitrary
    /// series (constant terms allowed).
    pub fn compose_polynomial(&self, g1: &Self, g2: &Self) -> Self {
        self.substitute(g1, g2, g1.trunc.min(g2.trunc))
    }

    fn substitute(&self, g1: &Self, g2: &Self, trunc: u32) -> Self {
        let g1 = g1.truncate(trunc);
        let g2 = g2.truncate(trunc);
        let max_i = self.terms.keys().map(|(i, _)| *i).max().unwrap_or(0);
        let max_j = self.terms.keys().map(|(_, j)| *j).max().unwrap_or(0);
        let mut p1 = vec![Self::one(trunc)];
        for _ in 0..max_i {
            let next = p1.last().unwrap().mul(&g1);
            p1.push(next);
        }
        let mut p2 = vec![Self::one(trunc)];
        for _ in 0..max_j {
            let next = p2.last().unwrap().mul(&g2);
            p2.push(next);
        }
        let mut out = Self::zero(trunc);
        for ((i, j), c) in &self.terms {
            let t = p1[*i as usize].mul(&p2[*j as usize]).scale(c);
            out = out.add(&t);
        }
        out
    }

    /// Swaps the roles of `z` and `w`.
    pub fn swap(&self) -> Self {
        Poly2::from_terms(self.terms.iter().map(|((i, j), c)| ((*j, *i), c.clone())), self.trunc)
    }

    /// Expression text accepted by the germ parser.
    pub fn to_expr(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut keys: Vec<_> = self.terms.keys().copied().collect();
        keys.sort_by_key(|(i, j)| (i + j, std::cmp::Reverse(*i)));
        let mut out = String::new();
        for (n, (i, j)) in keys.iter().enumerate() {
            let c = &self.terms[&(*i, *j)];
            let cs = match c.to_qc() {
                Some(q) => fmt_qc(&q),
                None => fmt_c64(c.to_c64()),
            };
            let mono = match (i, j) {
                (0, 0) => String::new(),
                _ => {
                    let mut parts = vec![];
                    if *i == 1 {
                        parts.push("z".to_string());
                    } else if *i > 1 {
                        parts.push(format!("z^{i}"));
                    }
                    if *j == 1 {
                        parts.push("w".to_string());
                    } else if *j > 1 {
                        parts.push(format!("w^{j}"));
                    }
                    parts.join("*")
                }
            };
            let term = if mono.is_empty() {
                format!("({cs})")
            } else if cs == "1" {
                mono
            } else {
                format!("({cs})*{mono}")
            };
            if n > 0 {
                out.push_str(" + ");
            }
            out.push_str(&term);
        }
        out
    }
}

impl<S: Scalar> fmt::Debug for Poly2<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + O({})", self.to_expr(), self.trunc + 1)
    }
}

/// `binom(p/q, k)` for `k < len`.
pub fn binomial_coeffs<S: Scalar>(p: i64, q: i64, len: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(len);
    let mut c = S::one();
    for k in 0..len {
        out.push(c.clone());
        // binom(x, k+1) = binom(x, k) * (x - k) / (k + 1), with x = p/q.
        c = c * S::from_ratio(p - (k as i64) * q, q * (k as i64 + 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::scalar::QC;

    fn p(terms: &[((u32, u32), i64)], trunc: u32) -> Poly2<QC> {
        Poly2::from_terms(terms.iter().map(|(k, c)| (*k, QC::from_i64(*c))), trunc)
    }

    #[test]
    fn difference_of_squares() {
        let a = p(&[((1, 0), 1), ((0, 1), 1)], 4);
        let b = p(&[((1, 0), 1), ((0, 1), -1)], 4);
        assert_eq!(a.mul(&b), p(&[((2, 0), 1), ((0, 2), -1)], 4));
    }

    #[test]
    fn truncation_drops_high_terms() {
        let zn = p(&[((5, 0), 1)], 5);
        let z = p(&[((1, 0), 1)], 5);
        assert!(zn.mul(&z).is_zero());
    }

    #[test]
    fn product_of_units() {
        let a = p(&[((0, 0), 1), ((1, 0), 1)], 2);
        let b = p(&[((0, 0), 1), ((0, 1), 1)], 2);
        assert_eq!(a.mul(&b), p(&[((0, 0), 1), ((1, 0), 1), ((0, 1), 1), ((1, 1), 1)], 2));
    }

    #[test]
    fn inverse_of_one_plus_z_plus_w() {
        let a = p(&[((0, 0), 1), ((1, 0), 1), ((0, 1), 1)], 2);
        let inv = a.series_inverse().unwrap();
        let expect = p(
            &[
                ((0, 0), 1),
                ((1, 0), -1),
                ((0, 1), -1),
                ((2, 0), 1),
                ((1, 1), 2),
                ((0, 2), 1),
            ],
            2,
        );
        assert_eq!(inv, expect);
        assert_eq!(a.mul(&inv), Poly2::one(2));
    }

    #[test]
    fn inverse_of_constant() {
        let a = p(&[((0, 0), 2)], 3);
        assert_eq!(a.series_inverse().unwrap(), Poly2::constant(QC::from_ratio(1, 2), 3));
        assert!(p(&[((1, 0), 1)], 3).series_inverse().is_err());
    }

    #[test]
    fn compositions() {
        let outer = p(&[((1, 1), 1)], 4);
        let g1 = p(&[((1, 0), 1), ((2, 0), 1)], 4);
        let g2 = p(&[((0, 1), 1)], 4);
        assert_eq!(outer.compose(&g1, &g2).unwrap(), p(&[((1, 1), 1), ((2, 1), 1)], 4));
        let swap = p(&[((2, 0), 1), ((0, 1), 1)], 4);
        assert_eq!(
            swap.compose(&g2, &p(&[((1, 0), 1)], 4)).unwrap(),
            p(&[((0, 2), 1), ((1, 0), 1)], 4)
        );
        let id = p(&[((1, 0), 1)], 4);
        assert_eq!(id.compose(&g1, &g2).unwrap(), g1);
    }

    #[test]
    fn composition_with_constant_term_is_rejected() {
        let outer = p(&[((1, 0), 1)], 4);
        let g = p(&[((0, 0), 1)], 4);
        assert_eq!(outer.compose(&g, &g), Err(Error::DivergentComposition));
    }

    #[test]
    fn mercator_and_binomial() {
        let z = p(&[((1, 0), 1)], 4);
        let l = z.log1p().unwrap();
        let expect = Poly2::from_terms(
            vec![
                ((1, 0), QC::from_ratio(1, 1)),
                ((2, 0), QC::from_ratio(-1, 2)),
                ((3, 0), QC::from_ratio(1, 3)),
                ((4, 0), QC::from_ratio(-1, 4)),
            ],
            4,
        );
        assert_eq!(l, expect);
        let s = z.binomial(1, 2).unwrap();
        assert_eq!(s.coeff(1, 0), QC::from_ratio(1, 2));
        assert_eq!(s.coeff(2, 0), QC::from_ratio(-1, 8));
        assert_eq!(z.binomial(0, 1).unwrap(), Poly2::one(4));
        assert_eq!(z.binomial(1, 1).unwrap(), z.add(&Poly2::one(4)));
    }

    #[test]
    fn exp_oracle_for_log1p() {
        let z = Poly2::<C64>::z(12);
        let l = z.log1p().unwrap();
        let v = l.eval(C64::new(0.01, 0.0), C64::new(0.0, 0.0));
        assert!((v.exp() - C64::new(1.01, 0.0)).norm() < 1e-12);
    }
}
