//! Laurent polynomials in one variable `t` with a truncated principal part.
//!
//! Coefficients of `t^e` are stored for `-depth <= e`; below that they are
//! unknown.  A depth of [`EXACT`] means the series is a genuine finite Laurent
//! polynomial.

use std::fmt;

use super::scalar::{Scalar, C64};

/// Depth marker for Laurent polynomials known to all orders.
pub const EXACT: i64 = i64::MAX / 8;

/// Default principal-part depth for formal solutions.
pub const DEFAULT_DEPTH: i64 = 24;

#[derive(Clone, PartialEq)]
pub struct Laurent1<S> {
    /// Exponent of `coeffs[0]`.
    lo: i64,
    coeffs: Vec<S>,
    depth: i64,
}

fn clamp_depth(d: i64) -> i64 {
    if d >= EXACT / 2 {
        EXACT
    } else {
        d
    }
}

impl<S: Scalar> Laurent1<S> {
    pub fn zero(depth: i64) -> Self {
        Laurent1 {
            lo: 0,
            coeffs: Vec::new(),
            depth: clamp_depth(depth),
        }
    }

    pub fn exact_zero() -> Self {
        Self::zero(EXACT)
    }

    pub fn monomial(c: S, e: i64) -> Self {
        let mut l = Self::exact_zero();
        l.set(e, c);
        l
    }

    pub fn constant(c: S) -> Self {
        Self::monomial(c, 0)
    }

    pub fn one() -> Self {
        Self::constant(S::one())
    }

    /// Builds from `(exponent, coefficient)` pairs.
    pub fn from_terms<I: IntoIterator<Item = (i64, S)>>(terms: I, depth: i64) -> Self {
        let mut l = Self::zero(depth);
        for (e, c) in terms {
            let v = l.coeff(e) + c;
            l.set(e, v);
        }
        l
    }

    pub fn depth(&self) -> i64 {
        self.depth
    }

    pub fn is_exact(&self) -> bool {
        self.depth == EXACT
    }

    /// Whether the coefficient of `t^e` is known.
    pub fn known(&self, e: i64) -> bool {
        e >= -self.depth
    }

    pub fn coeff(&self, e: i64) -> S {
        if e < self.lo || e >= self.lo + self.coeffs.len() as i64 {
            S::zero()
        } else {
            self.coeffs[(e - self.lo) as usize].clone()
        }
    }

    /// Sets a coefficient; exponents below the depth are ignored.
    pub fn set(&mut self, e: i64, c: S) {
        if !self.known(e) {
            return;
        }
        if self.coeffs.is_empty() {
            if c.is_zero() {
                return;
            }
            self.lo = e;
            self.coeffs.push(c);
            return;
        }
        if e < self.lo {
            if c.is_zero() {
                return;
            }
            let pad = (self.lo - e) as usize;
            let mut v = vec![S::zero(); pad];
            v.append(&mut self.coeffs);
            self.coeffs = v;
            self.lo = e;
        }
        let idx = (e - self.lo) as usize;
        if idx >= self.coeffs.len() {
            if c.is_zero() {
                return;
            }
            self.coeffs.resize(idx + 1, S::zero());
        }
        self.coeffs[idx] = c;
        self.trim();
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if c.is_zero()) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.lo += lead as i64;
        }
        if self.coeffs.is_empty() {
            self.lo = 0;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Nonzero `(exponent, coefficient)` pairs in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &S)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.lo + i as i64, c))
    }

    /// Highest exponent with a nonzero coefficient.
    pub fn degree(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.lo + self.coeffs.len() as i64 - 1)
        }
    }

    /// Lowest exponent with a stored nonzero coefficient.
    pub fn low(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.lo)
        }
    }

    /// The finite part `c_0 + c_1 t + ... + c_m t^m`.
    pub fn polynomial_part(&self) -> Self {
        Self::from_terms(
            self.terms().filter(|(e, _)| *e >= 0).map(|(e, c)| (e, c.clone())),
            EXACT,
        )
    }

    /// The principal part `sum_k c_{-k} t^{-k}`, keeping the depth.
    pub fn principal_part(&self) -> Self {
        Self::from_terms(
            self.terms().filter(|(e, _)| *e < 0).map(|(e, c)| (e, c.clone())),
            self.depth,
        )
    }

    /// Reduces the depth, discarding coefficients that fall below it.
    pub fn with_depth(&self, depth: i64) -> Self {
        let depth = clamp_depth(depth.min(self.depth));
        Self::from_terms(
            self.terms().filter(|(e, _)| *e >= -depth).map(|(e, c)| (e, c.clone())),
            depth,
        )
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Laurent1<T> {
        Laurent1::from_terms(self.terms().map(|(e, c)| (e, f(c))), self.depth)
    }

    pub fn to_float(&self) -> Laurent1<C64> {
        self.map(|c| c.to_c64())
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = self.clone();
        for v in out.coeffs.iter_mut() {
            *v = v.clone() * c.clone();
        }
        out.trim();
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&(-S::one()))
    }

    pub fn add(&self, other: &Self) -> Self {
        let depth = self.depth.min(other.depth);
        let mut out = self.with_depth(depth);
        for (e, c) in other.terms() {
            let v = out.coeff(e) + c.clone();
            out.set(e, v);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut depth = EXACT;
        if !self.is_exact() {
            // unknown tail of self times the top of other
            let top = other.degree().unwrap_or(i64::MIN / 4);
            if other.degree().is_some() || !other.is_exact() {
                depth = depth.min(self.depth - top.max(-other.depth));
            }
        }
        if !other.is_exact() {
            let top = self.degree().unwrap_or(i64::MIN / 4);
            if self.degree().is_some() || !self.is_exact() {
                depth = depth.min(other.depth - top.max(-self.depth));
            }
        }
        let depth = clamp_depth(depth);
        if self.is_zero() || other.is_zero() {
            return Self::zero(depth);
        }
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        let mut v = vec![S::zero(); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                v[i + j] = v[i + j].clone() + a.clone() * b.clone();
            }
        }
        let lo = self.lo + other.lo;
        let mut out = Laurent1 { lo, coeffs: v, depth };
        if lo < -depth {
            let cut = ((-depth) - lo) as usize;
            if cut >= out.coeffs.len() {
                out.coeffs.clear();
                out.lo = 0;
            } else {
                out.coeffs.drain(..cut);
                out.lo = -depth;
            }
        }
        out.trim();
        out
    }

    /// Multiplication by `t^e`.
    pub fn mul_tpow(&self, e: i64) -> Self {
        let mut out = self.clone();
        if !out.coeffs.is_empty() {
            out.lo += e;
        }
        out.depth = clamp_depth(if self.is_exact() { EXACT } else { self.depth - e });
        out
    }

    /// `d/dt`.
    pub fn derivative(&self) -> Self {
        let depth = if self.is_exact() { EXACT } else { self.depth + 1 };
        Self::from_terms(
            self.terms()
                .filter(|(e, _)| *e != 0)
                .map(|(e, c)| (e - 1, c.clone() * S::from_i64(e))),
            depth,
        )
    }

    pub fn eval(&self, t: C64) -> C64 {
        if self.coeffs.is_empty() {
            return C64::new(0.0, 0.0);
        }
        // Horner in t from the top exponent down, then rescale by t^lo.
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * t + c.to_c64();
        }
        acc * t.powi(self.lo as i32)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.magnitude()).fold(0.0, f64::max)
    }

    /// Drops coefficients of magnitude at most `floor` (float mode cleanup).
    pub fn chop(&self, floor: f64) -> Self {
        Self::from_terms(
            self.terms()
                .filter(|(_, c)| !c.negligible(floor))
                .map(|(e, c)| (e, c.clone())),
            self.depth,
        )
    }

    /// Whether every known coefficient is negligible.
    pub fn negligible(&self, floor: f64) -> bool {
        self.coeffs.iter().all(|c| c.negligible(floor))
    }
}

impl<S: Scalar> fmt::Debug for Laurent1<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms().map(|(e, c)| format!("{:?}*t^{}", c, e)).collect();
        if parts.is_empty() {
            write!(f, "0")?;
        } else {
            write!(f, "{}", parts.join(" + "))?;
        }
        if !self.is_exact() {
            write!(f, " + O(t^{})", -self.depth - 1)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::scalar::QC;

    fn l(terms: &[(i64, i64)], depth: i64) -> Laurent1<QC> {
        Laurent1::from_terms(terms.iter().map(|(e, c)| (*e, QC::from_i64(*c))), depth)
    }

    #[test]
    fn product_depth_bookkeeping() {
        // (t^2 + t^-1 + O(t^-5)) * (t + 1)
        let a = l(&[(2, 1), (-1, 1)], 4);
        let b = l(&[(1, 1), (0, 1)], EXACT);
        let c = a.mul(&b);
        assert_eq!(c.depth(), 3);
        assert_eq!(c.coeff(3), QC::from_i64(1));
        assert_eq!(c.coeff(2), QC::from_i64(1));
        assert_eq!(c.coeff(0), QC::from_i64(1));
        assert_eq!(c.coeff(-1), QC::from_i64(1));
    }

    #[test]
    fn exact_times_exact_stays_exact() {
        let a = l(&[(-3, 2), (1, 1)], EXACT);
        let b = l(&[(-1, 1)], EXACT);
        let c = a.mul(&b);
        assert!(c.is_exact());
        assert_eq!(c.coeff(-4), QC::from_i64(2));
        assert_eq!(c.coeff(0), QC::from_i64(1));
    }

    #[test]
    fn derivative_and_shift() {
        let a = l(&[(2, 1), (-1, 3)], 5);
        let d = a.derivative();
        assert_eq!(d.coeff(1), QC::from_i64(2));
        assert_eq!(d.coeff(-2), QC::from_i64(-3));
        assert_eq!(d.depth(), 6);
        let s = a.mul_tpow(2);
        assert_eq!(s.coeff(4), QC::from_i64(1));
        assert_eq!(s.depth(), 3);
    }

    #[test]
    fn evaluation_matches_terms() {
        let a = l(&[(2, 1), (-1, 3)], EXACT);
        let t = C64::new(1.5, -0.5);
        let want = t * t + C64::new(3.0, 0.0) / t;
        assert!((a.eval(t) - want).norm() < 1e-14);
    }
}
