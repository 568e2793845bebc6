//! Germs tangent to the identity and their first order invariants.

use std::fmt;

use crate::error::{Error, Result};
use crate::series::gcd::{monic, poly_div, poly_gcd, square_free, POLY_TRUNC};
use crate::series::roots::{complex_roots, exact_roots};
use crate::series::{fmt_c64, fmt_qc, Mode, Poly2, Scalar, UPoly, C64, QC};

/// A germ `f = (f1, f2)` of a self-map of `C^2` with `f(O) = O` and
/// `df_O = id`, known up to its truncation degree.
#[derive(Clone, PartialEq)]
pub struct Germ2<S> {
    pub f1: Poly2<S>,
    pub f2: Poly2<S>,
    /// Whether `f1`, `f2` are genuine polynomials (as parsed) rather than
    /// truncations of series.
    pub exact_poly: bool,
}

/// A point of `P^1`, normalized so the first nonzero entry is one.
#[derive(Clone, Debug, PartialEq)]
pub enum Proj<S> {
    /// `[1 : c]`
    Affine(S),
    /// `[0 : 1]`
    Infinity,
}

impl<S: Scalar> Proj<S> {
    pub fn x_axis() -> Self {
        Proj::Affine(S::zero())
    }

    pub fn to_float(&self) -> Proj<C64> {
        match self {
            Proj::Affine(c) => Proj::Affine(c.to_c64()),
            Proj::Infinity => Proj::Infinity,
        }
    }

    /// Homogeneous coordinates `(v1, v2)`.
    pub fn coords(&self) -> (S, S) {
        match self {
            Proj::Affine(c) => (S::one(), c.clone()),
            Proj::Infinity => (S::zero(), S::one()),
        }
    }

    /// Normalizes `[v1 : v2]`; `None` for `(0, 0)`.
    pub fn from_coords(v1: &S, v2: &S) -> Option<Self> {
        if !v1.is_zero() {
            Some(Proj::Affine(v2.div(v1)?))
        } else if !v2.is_zero() {
            Some(Proj::Infinity)
        } else {
            None
        }
    }
}

pub fn fmt_scalar<S: Scalar>(s: &S) -> String {
    match s.to_qc() {
        Some(q) => fmt_qc(&q),
        None => fmt_c64(s.to_c64()),
    }
}

impl<S: Scalar> fmt::Display for Proj<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proj::Affine(c) => write!(f, "[1:{}]", fmt_scalar(c)),
            Proj::Infinity => write!(f, "[0:1]"),
        }
    }
}

/// A characteristic direction with its eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction<S> {
    pub v: Proj<S>,
    pub lambda: S,
    pub degenerate: bool,
    pub multiplicity: usize,
}

/// Directions whose slope is not a complex rational (exact mode only):
/// the monic factor of `D(1, c)` carrying them, and numeric roots.
#[derive(Clone, Debug)]
pub struct IrrationalDirections {
    pub factor: UPoly<QC>,
    /// `(c, lambda)` for each root `[1 : c]` of the factor.
    pub numeric: Vec<(C64, C64)>,
}

#[derive(Clone, Debug)]
pub struct DirectionSet<S> {
    pub directions: Vec<Direction<S>>,
    pub irrational: Option<IrrationalDirections>,
}

impl<S: Scalar> DirectionSet<S> {
    pub fn total_multiplicity(&self) -> usize {
        self.directions.iter().map(|d| d.multiplicity).sum::<usize>()
            + self
                .irrational
                .as_ref()
                .map(|r| r.factor.degree().unwrap_or(0))
                .unwrap_or(0)
    }

    pub fn find(&self, v: &Proj<S>) -> Option<&Direction<S>> {
        self.directions.iter().find(|d| &d.v == v)
    }
}

/// Pure order and the singular/corner flags of a fixed point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointClass {
    pub pure_order: u32,
    pub singular: bool,
    pub corner: bool,
    pub dicritical: bool,
    /// Lower bound on the number of local components of the fixed point
    /// curve through the point.
    pub fix_components: usize,
}

impl<S: Scalar> Germ2<S> {
    /// Checks tangency to the identity: no constant terms and linear part
    /// equal to `(z, w)`.
    pub fn new(f1: Poly2<S>, f2: Poly2<S>) -> Result<Self> {
        Self::build(f1, f2, false)
    }

    /// A germ whose components are complete polynomials.
    pub fn polynomial(f1: Poly2<S>, f2: Poly2<S>) -> Result<Self> {
        Self::build(f1, f2, true)
    }

    fn build(f1: Poly2<S>, f2: Poly2<S>, exact_poly: bool) -> Result<Self> {
        if !f1.coeff(0, 0).is_zero() || !f2.coeff(0, 0).is_zero() {
            return Err(Error::NotTangent("f(O) != O".into()));
        }
        if f1.trunc() < 1 || f2.trunc() < 1 {
            return Err(Error::NotTangent(
                "truncation below degree 1 leaves the differential undefined".into(),
            ));
        }
        let one = S::one();
        if f1.coeff(1, 0) != one || !f1.coeff(0, 1).is_zero() || !f2.coeff(0, 1).eq(&one) || !f2.coeff(1, 0).is_zero() {
            return Err(Error::NotTangent("the linear part is not the identity".into()));
        }
        Ok(Germ2 { f1, f2, exact_poly })
    }

    /// Builds from the nonlinear parts: `f = (z + g, w + h)`.
    pub fn from_parts(g: Poly2<S>, h: Poly2<S>) -> Result<Self> {
        let n = g.trunc().min(h.trunc());
        Self::new(g.add(&Poly2::z(n)), h.add(&Poly2::w(n)))
    }

    pub fn identity(trunc: u32) -> Self {
        Germ2 {
            f1: Poly2::z(trunc),
            f2: Poly2::w(trunc),
            exact_poly: true,
        }
    }

    pub fn trunc(&self) -> u32 {
        self.f1.trunc().min(self.f2.trunc())
    }

    pub fn mode(&self) -> Mode {
        S::MODE
    }

    /// `f1 - z`.
    pub fn g(&self) -> Poly2<S> {
        self.f1.sub(&Poly2::z(self.f1.trunc()))
    }

    /// `f2 - w`.
    pub fn h(&self) -> Poly2<S> {
        self.f2.sub(&Poly2::w(self.f2.trunc()))
    }

    pub fn to_float(&self) -> Germ2<C64> {
        Germ2 {
            f1: self.f1.to_float(),
            f2: self.f2.to_float(),
            exact_poly: self.exact_poly,
        }
    }

    pub fn with_trunc(&self, n: u32) -> Self {
        Germ2 {
            f1: self.f1.with_trunc(n),
            f2: self.f2.with_trunc(n),
            exact_poly: self.exact_poly,
        }
    }

    /// Numeric value `f(z, w)`.
    pub fn eval(&self, z: C64, w: C64) -> (C64, C64) {
        (self.f1.eval(z, w), self.f2.eval(z, w))
    }

    /// `nu(f)`: least degree of a nonzero homogeneous part of `f - id`.
    pub fn order(&self) -> Result<u32> {
        let o1 = self.g().order();
        let o2 = self.h().order();
        match (o1, o2) {
            (None, None) => Err(Error::OrderUndefined { trunc: self.trunc() }),
            (a, b) => Ok(a.unwrap_or(u32::MAX).min(b.unwrap_or(u32::MAX))),
        }
    }

    /// `(P_{1,nu}, P_{2,nu})`.
    pub fn leading_parts(&self) -> Result<(Poly2<S>, Poly2<S>)> {
        let nu = self.order()?;
        Ok((self.g().homogeneous(nu), self.h().homogeneous(nu)))
    }

    /// The form `w P_{1,nu} - z P_{2,nu}` of degree `nu + 1`.
    pub fn characteristic_form(&self) -> Result<Poly2<S>> {
        let (p1, p2) = self.leading_parts()?;
        let t = p1.trunc().max(p2.trunc()) + 1;
        Ok(p1
            .with_trunc(t)
            .mul_monomial(0, 1)
            .sub(&p2.with_trunc(t).mul_monomial(1, 0)))
    }

    pub fn is_dicritical(&self) -> Result<bool> {
        Ok(self.characteristic_form()?.is_zero())
    }

    /// Characteristic directions with multiplicities.  Exact mode returns
    /// the complex-rational slopes exactly and gathers the remaining ones in
    /// an irrational factor; float mode clusters numeric roots.
    pub fn characteristic_directions(&self) -> Result<DirectionSet<S>> {
        if self.is_dicritical()? {
            return Err(Error::Dicritical);
        }
        let nu = self.order()? as usize;
        let (p1, p2) = self.leading_parts()?;
        let form = self.characteristic_form()?;
        let d = dehomogenize(&form);
        let deg_d = d.degree().unwrap_or(0);
        let mut dirs: Vec<Direction<S>> = Vec::new();
        let inf_mult = nu + 1 - deg_d;
        if inf_mult > 0 {
            let lambda = p2.coeff(0, nu as u32);
            dirs.push(Direction {
                v: Proj::Infinity,
                degenerate: lambda.is_zero(),
                lambda,
                multiplicity: inf_mult,
            });
        }
        let p1c = dehomogenize(&p1);
        let mut irrational = None;
        match S::MODE {
            Mode::Exact => {
                let dq = UPoly::new(d.coeffs().iter().map(|c| c.to_qc().expect("exact")).collect());
                let roots = exact_roots(&dq);
                for (c, mult) in roots.rational {
                    let c = S::from_qc(&c);
                    let lambda = p1c.eval(&c);
                    dirs.push(Direction {
                        v: Proj::Affine(c),
                        degenerate: lambda.is_zero(),
                        lambda,
                        multiplicity: mult,
                    });
                }
                if roots.residual.degree().unwrap_or(0) > 0 {
                    let p1f = p1c.to_float();
                    irrational = Some(IrrationalDirections {
                        numeric: roots.residual_numeric.iter().map(|c| (*c, p1f.eval_c64(*c))).collect(),
                        factor: roots.residual,
                    });
                }
            }
            Mode::Float => {
                let roots = complex_roots(&d.to_float());
                for (c, mult) in cluster_roots(&roots, 1e-6) {
                    let c = S::from_c64(c).expect("float");
                    let lambda = p1c.eval(&c);
                    let scale = 1.0 + p1c.coeffs().iter().map(|x| x.magnitude()).fold(0.0, f64::max);
                    dirs.push(Direction {
                        v: Proj::Affine(c),
                        degenerate: lambda.magnitude() <= 1e-9 * scale,
                        lambda,
                        multiplicity: mult,
                    });
                }
            }
        }
        Ok(DirectionSet {
            directions: dirs,
            irrational,
        })
    }

    /// Whether `[v]` is characteristic, decided exactly in exact mode.
    pub fn is_characteristic(&self, v: &Proj<S>) -> Result<bool> {
        let form = self.characteristic_form()?;
        let (a, b) = v.coords();
        let val = form.eval_exact(&a, &b);
        Ok(match S::MODE {
            Mode::Exact => val.is_zero(),
            Mode::Float => val.magnitude() <= 1e-9,
        })
    }

    /// `P_{j,nu}(v) = lambda v_j` residuals for a direction.
    pub fn eigen_residual(&self, d: &Direction<S>) -> Result<(S, S)> {
        let (p1, p2) = self.leading_parts()?;
        let (a, b) = d.v.coords();
        Ok((
            p1.eval_exact(&a, &b) - d.lambda.clone() * a.clone(),
            p2.eval_exact(&a, &b) - d.lambda.clone() * b,
        ))
    }

    /// Pure order of the fixed point at the origin, together with the corner
    /// test.  Requires exact polynomial components.
    pub fn pure_order(&self) -> Result<PointClass> {
        if S::MODE == Mode::Float {
            return Err(Error::FloatUnsupported { op: "pure_order" });
        }
        if !self.exact_poly {
            return Err(Error::Invalid(
                "pure order needs complete polynomials, not truncated series".into(),
            ));
        }
        classify_fixed_point(&self.g(), &self.h())
    }

    /// `L^-1 o f o L` for the linear map `L(z, w) = (a z + b w, c z + d w)`.
    pub fn conjugate_linear(&self, m: [[S; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = m;
        let det = a.clone() * d.clone() - b.clone() * c.clone();
        let di = det.inv().ok_or_else(|| Error::Invalid("singular linear map".into()))?;
        let n = self.trunc();
        let lz = Poly2::from_terms([((1, 0), a.clone()), ((0, 1), b.clone())], n);
        let lw = Poly2::from_terms([((1, 0), c.clone()), ((0, 1), d.clone())], n);
        let f1 = self.f1.compose(&lz, &lw)?;
        let f2 = self.f2.compose(&lz, &lw)?;
        // inverse: (d x - b y, -c x + a y) / det
        let g1 = f1.scale(&(d.clone() * di.clone())).sub(&f2.scale(&(b * di.clone())));
        let g2 = f2.scale(&(a * di.clone())).sub(&f1.scale(&(c * di)));
        Ok(Germ2 {
            f1: g1,
            f2: g2,
            exact_poly: self.exact_poly,
        })
    }
}

/// Pure order, corner and dicritical flags of the fixed point at `O` of a
/// map `id + (g, h) * unit` with polynomial `g`, `h`.
pub fn classify_fixed_point<S: Scalar>(g: &Poly2<S>, h: &Poly2<S>) -> Result<PointClass> {
    if S::MODE == Mode::Float {
        return Err(Error::FloatUnsupported { op: "pure_order" });
    }
    let g = g.with_trunc(POLY_TRUNC);
    let h = h.with_trunc(POLY_TRUNC);
    if g.is_zero() && h.is_zero() {
        return Err(Error::OrderUndefined { trunc: POLY_TRUNC });
    }
    let l = poly_gcd(&g, &h)?;
    let go = poly_div(&g, &l)?.expect("gcd divides");
    let ho = poly_div(&h, &l)?.expect("gcd divides");
    let po = match (go.order(), ho.order()) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => unreachable!("l divides a nonzero polynomial"),
    };
    let comps = fix_components(&l)?;
    let nu = g.order().unwrap_or(u32::MAX).min(h.order().unwrap_or(u32::MAX));
    let form = g
        .homogeneous(nu)
        .mul_monomial(0, 1)
        .sub(&h.homogeneous(nu).mul_monomial(1, 0));
    Ok(PointClass {
        pure_order: po,
        singular: po >= 1,
        corner: comps >= 2,
        dicritical: form.is_zero(),
        fix_components: comps,
    })
}

/// `P(1, c)` for a homogeneous form `P(z, w)`.
pub fn dehomogenize<S: Scalar>(p: &Poly2<S>) -> UPoly<S> {
    let maxj = p.terms().map(|((_, j), _)| *j).max().unwrap_or(0) as usize;
    let mut c = vec![S::zero(); maxj + 1];
    for ((_, j), v) in p.terms() {
        c[*j as usize] = c[*j as usize].clone() + v.clone();
    }
    UPoly::new(c)
}

fn cluster_roots(roots: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let mut groups: Vec<(Vec<C64>, C64)> = Vec::new();
    for r in roots {
        match groups
            .iter_mut()
            .find(|(_, c)| (*c - r).norm() <= tol * (1.0 + r.norm()))
        {
            Some((members, c)) => {
                members.push(*r);
                *c = members.iter().sum::<C64>() / members.len() as f64;
            }
            None => groups.push((vec![*r], *r)),
        }
    }
    let mut out: Vec<(C64, usize)> = groups.into_iter().map(|(m, c)| (c, m.len())).collect();
    out.sort_by(|a, b| {
        a.0.re
            .partial_cmp(&b.0.re)
            .unwrap()
            .then(a.0.im.partial_cmp(&b.0.im).unwrap())
    });
    out
}

/// Lower bound on the number of local branches through `O` of `{l = 0}`:
/// the coordinate axes dividing `l`, plus the distinct tangent lines of the
/// square-free part of the remaining factor.
fn fix_components<S: Scalar>(l: &Poly2<S>) -> Result<usize> {
    if l.constant_term() != S::zero() {
        return Ok(0);
    }
    let l = l.map(|c| c.to_qc().expect("exact"));
    let zv = l.z_adic_valuation().unwrap_or(0);
    let wv = l.w_adic_valuation().unwrap_or(0);
    let mut count = (zv > 0) as usize + (wv > 0) as usize;
    let rest = l.div_monomial(zv, wv)?.with_trunc(POLY_TRUNC);
    if num_traits::Zero::is_zero(&rest.constant_term()) && !rest.is_zero() {
        let rad = square_free(&rest)?;
        let ord = rad.order().unwrap_or(0);
        let cone = monic(&rad.homogeneous(ord));
        let d = dehomogenize(&cone);
        let affine = d.square_free().degree().unwrap_or(0);
        let at_inf = (d.degree().unwrap_or(0) < ord as usize) as usize;
        count += (affine + at_inf).max(1);
    }
    Ok(count)
}

impl<S: Scalar> fmt::Debug for Germ2<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f1 = {:?}; f2 = {:?}", self.f1, self.f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn q(n: i64) -> QC {
        QC::from_i64(n)
    }

    fn germ(g: &[((u32, u32), i64)], h: &[((u32, u32), i64)]) -> Germ2<QC> {
        let n = 10;
        let g = Poly2::from_terms(g.iter().map(|(e, c)| (*e, q(*c))), n);
        let h = Poly2::from_terms(h.iter().map(|(e, c)| (*e, q(*c))), n);
        Germ2::polynomial(g.add(&Poly2::z(n)), h.add(&Poly2::w(n))).unwrap()
    }

    #[test]
    fn orders() {
        assert_eq!(germ(&[((2, 0), 1)], &[((0, 3), 1)]).order().unwrap(), 2);
        assert_eq!(germ(&[((1, 2), 1)], &[]).order().unwrap(), 3);
        assert!(matches!(germ(&[], &[]).order(), Err(Error::OrderUndefined { .. })));
    }

    #[test]
    fn dicritical_detection() {
        let f = germ(&[((2, 0), 1), ((1, 1), 1)], &[((1, 1), 1), ((0, 2), 1)]);
        assert!(f.is_dicritical().unwrap());
        assert!(matches!(f.characteristic_directions(), Err(Error::Dicritical)));
        let f = germ(&[((2, 0), 1)], &[((0, 2), 1)]);
        assert!(!f.is_dicritical().unwrap());
    }

    #[test]
    fn three_directions() {
        let f = germ(&[((2, 0), 1)], &[((0, 2), 1)]);
        let ds = f.characteristic_directions().unwrap();
        assert_eq!(ds.total_multiplicity(), 3);
        for v in [Proj::Affine(q(0)), Proj::Affine(q(1)), Proj::Infinity] {
            let d = ds.find(&v).unwrap();
            assert_eq!(d.lambda, q(1));
            assert!(!d.degenerate);
            let (r1, r2) = f.eigen_residual(d).unwrap();
            assert!(r1.is_zero() && r2.is_zero());
        }
    }

    #[test]
    fn pure_order_examples() {
        let f = germ(&[((2, 0), 1)], &[((1, 1), 1)]);
        let pc = f.pure_order().unwrap();
        assert_eq!(pc.pure_order, 1);
        assert!(pc.singular);
        assert!(!pc.corner);
        let f = germ(&[((2, 1), 1)], &[((1, 2), 1)]);
        let pc = f.pure_order().unwrap();
        assert!(pc.corner);
        assert_eq!(pc.fix_components, 2);
        assert!(germ(&[], &[]).pure_order().is_err());
    }

    #[test]
    fn linear_conjugation_roundtrip() {
        let f = germ(&[((2, 0), 1), ((0, 3), 2)], &[((1, 1), -1)]);
        let m = [[q(1), q(2)], [q(0), q(1)]];
        let minv = [[q(1), q(-2)], [q(0), q(1)]];
        let back = f.conjugate_linear(m).unwrap().conjugate_linear(minv).unwrap();
        assert_eq!(back.f1.truncate(8), f.f1.truncate(8));
        assert_eq!(back.f2.truncate(8), f.f2.truncate(8));
    }
}
