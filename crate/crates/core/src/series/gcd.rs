//! Exact bivariate polynomial gcd over complex rationals.
//!
//! Polynomials are viewed in `K[z][w]`; contents are handled with univariate
//! gcds in `z` and the primitive parts with a primitive remainder sequence in
//! `w`.

use super::poly2::Poly2;
use super::scalar::{Mode, Scalar, QC};
use super::upoly::UPoly;
use crate::error::{Error, Result};

/// Truncation degree used to mark a `Poly2` as a genuine polynomial.
pub const POLY_TRUNC: u32 = 1 << 20;

type Rec = Vec<UPoly<QC>>;

fn to_rec(p: &Poly2<QC>) -> Rec {
    let maxj = p.terms().map(|((_, j), _)| *j).max().unwrap_or(0) as usize;
    let mut rows: Vec<Vec<QC>> = vec![Vec::new(); maxj + 1];
    for ((i, j), c) in p.terms() {
        let row = &mut rows[*j as usize];
        if row.len() <= *i as usize {
            row.resize(*i as usize + 1, QC::from_i64(0));
        }
        row[*i as usize] = c.clone();
    }
    let mut rec: Rec = rows.into_iter().map(UPoly::new).collect();
    trim(&mut rec);
    rec
}

fn from_rec(r: &Rec) -> Poly2<QC> {
    let mut out = Poly2::zero(POLY_TRUNC);
    for (j, row) in r.iter().enumerate() {
        for (i, c) in row.coeffs().iter().enumerate() {
            out.add_term(i as u32, j as u32, c.clone());
        }
    }
    out
}

fn trim(r: &mut Rec) {
    while matches!(r.last(), Some(x) if x.is_zero()) {
        r.pop();
    }
}

fn content(r: &Rec) -> UPoly<QC> {
    let mut g = UPoly::zero();
    for c in r {
        g = g.gcd(c);
        if g.degree() == Some(0) {
            break;
        }
    }
    g
}

fn div_content(r: &Rec, c: &UPoly<QC>) -> Rec {
    r.iter().map(|x| x.div_exact(c).expect("content divides")).collect()
}

fn primitive(r: &Rec) -> Rec {
    if r.is_empty() {
        return Vec::new();
    }
    div_content(r, &content(r))
}

/// Pseudo-remainder of `a` by `b` in `w`.
fn prem(a: &Rec, b: &Rec) -> Rec {
    let db = b.len() - 1;
    let lb = b[db].clone();
    let mut r = a.clone();
    while r.len() > db && !r.is_empty() {
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        let shift = dr - db;
        let mut next: Rec = r.iter().map(|x| x.mul(&lb)).collect();
        for (k, bk) in b.iter().enumerate() {
            next[k + shift] = next[k + shift].sub(&bk.mul(&lr));
        }
        trim(&mut next);
        r = next;
    }
    r
}

fn rec_gcd(a: &Rec, b: &Rec) -> Rec {
    if a.is_empty() {
        return b.clone();
    }
    if b.is_empty() {
        return a.clone();
    }
    let cont = content(a).gcd(&content(b));
    let mut x = primitive(a);
    let mut y = primitive(b);
    if x.len() < y.len() {
        std::mem::swap(&mut x, &mut y);
    }
    while !y.is_empty() && y.len() > 1 {
        let r = prem(&x, &y);
        x = y;
        y = primitive(&r);
    }
    let g = if y.is_empty() {
        x
    } else {
        // y is a nonzero polynomial in z alone: primitive, so a unit.
        vec![UPoly::one()]
    };
    g.iter().map(|c| c.mul(&cont)).collect()
}

fn require_exact<S: Scalar>(op: &'static str) -> Result<()> {
    if S::MODE == Mode::Float {
        Err(Error::FloatUnsupported { op })
    } else {
        Ok(())
    }
}

fn to_qc<S: Scalar>(p: &Poly2<S>) -> Poly2<QC> {
    p.map(|c| c.to_qc().expect("exact coefficient"))
}

/// Normalizes so the leading term (highest `w` degree, then highest `z`
/// degree) has coefficient one.
pub fn monic(p: &Poly2<QC>) -> Poly2<QC> {
    let lead = p.terms().max_by_key(|((i, j), _)| (*j, *i)).map(|(_, c)| c.clone());
    match lead.and_then(|c| Scalar::inv(&c)) {
        Some(inv) => p.scale(&inv),
        None => p.clone(),
    }
}

/// Monic gcd of two genuine polynomials.  Both must be exact; the result is
/// independent of the truncation degrees, which are ignored.
pub fn poly_gcd<S: Scalar>(a: &Poly2<S>, b: &Poly2<S>) -> Result<Poly2<S>> {
    require_exact::<S>("poly_gcd")?;
    let g = rec_gcd(&to_rec(&to_qc(a)), &to_rec(&to_qc(b)));
    Ok(monic(&from_rec(&g)).map(S::from_qc))
}

/// Exact quotient `a / b`, or `None` when `b` does not divide `a`.
pub fn poly_div<S: Scalar>(a: &Poly2<S>, b: &Poly2<S>) -> Result<Option<Poly2<S>>> {
    require_exact::<S>("poly_div")?;
    let a = to_rec(&to_qc(a));
    let b = to_rec(&to_qc(b));
    if b.is_empty() {
        return Err(Error::Invalid("division by the zero polynomial".into()));
    }
    let db = b.len() - 1;
    let lb = &b[db];
    let mut r = a;
    let mut q: Rec = vec![UPoly::zero(); r.len().saturating_sub(db).max(1)];
    while !r.is_empty() && r.len() > db {
        let dr = r.len() - 1;
        let Some(c) = r[dr].div_exact(lb) else {
            return Ok(None);
        };
        let shift = dr - db;
        q[shift] = q[shift].add(&c);
        for (k, bk) in b.iter().enumerate() {
            r[k + shift] = r[k + shift].sub(&bk.mul(&c));
        }
        trim(&mut r);
    }
    if !r.is_empty() {
        return Ok(None);
    }
    trim(&mut q);
    Ok(Some(from_rec(&q).map(S::from_qc)))
}

/// Square-free part of a genuine polynomial, monic.
pub fn square_free<S: Scalar>(p: &Poly2<S>) -> Result<Poly2<S>> {
    require_exact::<S>("square_free")?;
    let p = to_qc(p).with_trunc(POLY_TRUNC);
    if p.degree().unwrap_or(0) == 0 {
        return Ok(monic(&p).map(S::from_qc));
    }
    let g = poly_gcd(&poly_gcd(&p, &p.dz())?, &p.dw())?;
    let q = poly_div(&p, &g)?.expect("gcd divides");
    Ok(monic(&q).map(S::from_qc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(terms: &[((u32, u32), i64)]) -> Poly2<QC> {
        Poly2::from_terms(terms.iter().map(|(e, c)| (*e, QC::from_i64(*c))), POLY_TRUNC)
    }

    #[test]
    fn monomial_gcd() {
        let a = poly(&[((2, 1), 1)]);
        let b = poly(&[((1, 2), 1)]);
        assert_eq!(poly_gcd(&a, &b).unwrap(), poly(&[((1, 1), 1)]));
    }

    #[test]
    fn common_linear_factor() {
        let a = poly(&[((1, 1), 1), ((0, 2), 1)]);
        let b = poly(&[((2, 0), 1), ((1, 1), 1)]);
        assert_eq!(poly_gcd(&a, &b).unwrap(), poly(&[((1, 0), 1), ((0, 1), 1)]));
    }

    #[test]
    fn coprime() {
        let a = poly(&[((1, 0), 1)]);
        let b = poly(&[((0, 1), 1)]);
        assert_eq!(poly_gcd(&a, &b).unwrap(), poly(&[((0, 0), 1)]));
    }

    #[test]
    fn quotients_are_exact() {
        // (z + w)(z - 2 w^2) and (z + w)^2 w
        let l = poly(&[((1, 0), 1), ((0, 1), 1)]);
        let a = l.mul(&poly(&[((1, 0), 1), ((0, 2), -2)]));
        let b = l.mul(&l).mul(&poly(&[((0, 1), 1)]));
        let g = poly_gcd(&a, &b).unwrap();
        assert_eq!(g, l);
        assert!(poly_div(&a, &g).unwrap().is_some());
        assert!(poly_div(&b, &g).unwrap().is_some());
        assert!(poly_div(&a, &poly(&[((0, 1), 1)])).unwrap().is_none());
    }

    #[test]
    fn float_mode_rejected() {
        let a = Poly2::<crate::series::scalar::C64>::z(4);
        assert!(matches!(poly_gcd(&a, &a), Err(Error::FloatUnsupported { .. })));
    }

    #[test]
    fn square_free_part() {
        // z^2 w (z + w)^3
        let l = poly(&[((1, 0), 1), ((0, 1), 1)]);
        let p = poly(&[((2, 1), 1)]).mul(&l).mul(&l).mul(&l);
        let s = square_free(&p).unwrap();
        assert_eq!(s, monic(&poly(&[((1, 1), 1)]).mul(&l)));
    }
}
