//! Adapted-chart invariants and the residual index along the exceptional
//! divisor.

use std::fmt;

use crate::blowup::LiftedGerm;
use crate::error::{Error, Result};
use crate::germ::Germ2;
use crate::series::{Poly2, Scalar, C64};

/// `f1 = z + z^(r+1) A0`, `f2 = w + z^r B1` in a chart adapted to
/// `S = {z = 0}`.
#[derive(Clone, PartialEq)]
pub struct AdaptedForm<S> {
    pub r: u32,
    pub a0: Poly2<S>,
    pub b1: Poly2<S>,
}

impl<S: Scalar> AdaptedForm<S> {
    pub fn new(r: u32, a0: Poly2<S>, b1: Poly2<S>) -> Result<Self> {
        if r == 0 {
            return Err(Error::Invalid("r must be at least one".into()));
        }
        if b1.restrict_z0().is_empty() {
            return Err(Error::Invalid("z divides B1".into()));
        }
        Ok(AdaptedForm { r, a0, b1 })
    }

    /// `a_{i,j}`
    pub fn a(&self, i: u32, j: u32) -> S {
        self.a0.coeff(i, j)
    }

    /// `b_{i,j}`
    pub fn b(&self, i: u32, j: u32) -> S {
        self.b1.coeff(i, j)
    }

    pub fn to_float(&self) -> AdaptedForm<C64> {
        AdaptedForm {
            r: self.r,
            a0: self.a0.to_float(),
            b1: self.b1.to_float(),
        }
    }

    /// The germ this form describes, truncated at total degree `trunc`.
    pub fn germ(&self, trunc: u32) -> Germ2<S> {
        let r = self.r;
        let g = self.a0.with_trunc(trunc).mul_monomial(r + 1, 0).truncate(trunc);
        let h = self.b1.with_trunc(trunc).mul_monomial(r, 0).truncate(trunc);
        Germ2 {
            f1: g.add(&Poly2::z(trunc)),
            f2: h.add(&Poly2::w(trunc)),
            exact_poly: self.a0.trunc() >= crate::POLY_TRUNC && self.b1.trunc() >= crate::POLY_TRUNC,
        }
    }
}

/// `mu` / `nu` exponents; `None` is infinity.
pub type Exponent = Option<i64>;

/// `k(w)` as a Laurent series in `w`, known for exponents below `hi`.
#[derive(Clone, PartialEq)]
pub struct KSeries<S> {
    pub lo: i64,
    pub coeffs: Vec<S>,
    pub hi: i64,
}

impl<S: Scalar> KSeries<S> {
    pub fn coeff(&self, e: i64) -> S {
        if e < self.lo {
            return S::zero();
        }
        self.coeffs.get((e - self.lo) as usize).cloned().unwrap_or_else(S::zero)
    }

    pub fn residue(&self) -> S {
        self.coeff(-1)
    }

    pub fn eval(&self, w: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            acc += c.to_c64() * w.powi((self.lo + k as i64) as i32);
        }
        acc
    }
}

impl<S: Scalar> fmt::Debug for KSeries<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| format!("({c:?})w^{}", self.lo + k as i64))
            .collect();
        write!(f, "{} + O(w^{})", parts.join(" + "), self.hi)
    }
}

#[derive(Clone)]
pub struct IndexData<S> {
    pub mu: Exponent,
    pub nu: Exponent,
    pub k_series: KSeries<S>,
    pub index: S,
    /// `None` when `A0(0, w)` vanishes to the known order.
    pub m: Option<u32>,
    pub n: u32,
    pub tangential: bool,
}

impl<S: Scalar> fmt::Debug for AdaptedForm<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r = {}; A0 = {:?}; B1 = {:?}", self.r, self.a0, self.b1)
    }
}

impl<S: Scalar> fmt::Debug for IndexData<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndexData")
            .field("mu", &self.mu)
            .field("nu", &self.nu)
            .field("k", &self.k_series)
            .field("index", &self.index)
            .field("m", &self.m)
            .field("n", &self.n)
            .finish()
    }
}

/// `(mu, nu)` of a germ fixing `{z = 0}` pointwise.
pub fn mu_nu<S: Scalar>(f: &Germ2<S>) -> (Exponent, Exponent) {
    let mu = f.g().z_adic_valuation().map(|v| v as i64 - 2);
    let nu = f.h().z_adic_valuation().map(|v| v as i64 - 1);
    (mu, nu)
}

/// `mu >= nu`, with infinities.
fn tangential(mu: Exponent, nu: Exponent) -> bool {
    match (mu, nu) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(a), Some(b)) => a >= b,
    }
}

/// Extracts `r`, `A0`, `B1` from a lift with `f|_S = id`.
pub fn adapted_form<S: Scalar>(f: &LiftedGerm<S>) -> Result<AdaptedForm<S>> {
    let g = f.adapted_germ();
    if !f.fixes_divisor() {
        return Err(Error::Hypothesis("f does not fix the divisor pointwise".into()));
    }
    adapted_form_of(&g)
}

/// Same as [`adapted_form`] for a germ already written in an adapted chart.
pub fn adapted_form_of<S: Scalar>(g: &Germ2<S>) -> Result<AdaptedForm<S>> {
    let (mu, nu) = mu_nu(g);
    if !tangential(mu, nu) {
        return Err(Error::NotTangential);
    }
    let Some(nu) = nu else {
        return Err(Error::OrderUndefined { trunc: g.trunc() });
    };
    let r = (nu + 1) as u32;
    let a0 = match g.g().is_zero() {
        true => Poly2::zero(g.trunc().saturating_sub(r + 1)),
        false => g.g().div_monomial(r + 1, 0)?,
    };
    let b1 = g.h().div_monomial(r, 0)?;
    Ok(AdaptedForm { r, a0, b1 })
}

/// Default number of `k(w)` coefficients beyond `w^-n`.
pub const K_EXTRA: usize = 8;

/// `k(w) = A0(0, w) / B1(0, w)` and its residue.
pub fn residual_index<S: Scalar>(af: &AdaptedForm<S>) -> Result<IndexData<S>> {
    let a = af.a0.restrict_z0();
    let b = af.b1.restrict_z0();
    let Some((&n, _)) = b.iter().next() else {
        return Err(Error::TruncationExhausted {
            op: "residual_index",
            need: 1,
            have: af.b1.trunc() as i64,
        });
    };
    let m = a.keys().next().copied();
    // A0(0, w) known through degree trunc(A0); beta = B1(0, w) / w^n through
    // trunc(B1) - n.
    let known = (af.a0.trunc() as i64).min(af.b1.trunc() as i64 - n as i64);
    if known < n as i64 - 1 {
        return Err(Error::TruncationExhausted {
            op: "residual_index",
            need: n as i64 - 1,
            have: known,
        });
    }
    let len = (known as usize + 1).min(n as usize + K_EXTRA);
    let beta: Vec<S> = (0..len)
        .map(|j| b.get(&(n + j as u32)).cloned().unwrap_or_else(S::zero))
        .collect();
    let inv0 = beta[0].inv().expect("b_{0,n} != 0");
    let mut binv: Vec<S> = vec![inv0.clone()];
    for k in 1..len {
        let mut acc = S::zero();
        for j in 1..=k {
            acc = acc + beta[j].clone() * binv[k - j].clone();
        }
        binv.push(-(acc * inv0.clone()));
    }
    let coeffs: Vec<S> = (0..len)
        .map(|k| {
            (0..=k).fold(S::zero(), |acc, j| {
                acc + a.get(&(j as u32)).cloned().unwrap_or_else(S::zero) * binv[k - j].clone()
            })
        })
        .collect();
    let k_series = KSeries {
        lo: -(n as i64),
        hi: len as i64 - n as i64,
        coeffs,
    };
    let g = af.germ(af.b1.trunc() + af.r);
    let (mu, nu) = mu_nu(&g);
    Ok(IndexData {
        mu,
        nu,
        index: k_series.residue(),
        k_series,
        m,
        n,
        tangential: true,
    })
}

/// `(1/2 pi i) \oint k(w) dw` on `|w| = radius` by the trapezoid rule,
/// evaluating `A0(0, w) / B1(0, w)` directly.
pub fn contour_residue<S: Scalar>(af: &AdaptedForm<S>, radius: f64, nodes: usize) -> C64 {
    let a: Vec<(u32, C64)> = af.a0.restrict_z0().into_iter().map(|(j, c)| (j, c.to_c64())).collect();
    let b: Vec<(u32, C64)> = af.b1.restrict_z0().into_iter().map(|(j, c)| (j, c.to_c64())).collect();
    let ev = |p: &[(u32, C64)], w: C64| p.iter().map(|(j, c)| c * w.powu(*j)).sum::<C64>();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..nodes {
        let th = 2.0 * std::f64::consts::PI * k as f64 / nodes as f64;
        let w = C64::from_polar(radius, th);
        // dw / (2 pi i) = w dtheta / (2 pi)
        acc += ev(&a, w) / ev(&b, w) * w;
    }
    acc / nodes as f64
}
