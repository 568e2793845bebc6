//! Normal form in the hard case `m = n - 1`, `Ind = n`.
//!
//! Starting from an adapted form `f1 = z + z^(r+1) A0`, `f2 = w + z^r B1`
//! with `A0(0, w) = A w^(n-1) + ...`, `B1(0, w) = B w^n + ...`, `A = n B`, the
//! map is conjugated by `Z = alpha z` and the shear
//! `v = W - a Z^(1/n) (log Z)^(1/n)`; the result is a ramified log series
//! `f^` in `(u, v)`.  A ladder of shifts `w -> w - z^((h+2)/n) Q_h(t)` then
//! raises the order of `f^_2(z, w(z)) - w(f^_1(z, w(z)))` one step at a time.

use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::index::{residual_index, AdaptedForm};
use crate::series::roots::{exact_roots, nth_roots};
use crate::series::{
    Branch, Laurent1, Poly2, RamifiedLogSeries, Scalar, UPoly, C64, DEFAULT_DEPTH, EXACT, POLY_TRUNC, QC,
};

/// Relative tolerance used to decide that a float coefficient vanishes.
pub const HARD_TOL: f64 = 1e-9;

type Series<S> = RamifiedLogSeries<S>;

/// The chosen `(alpha, a)` and every candidate pair, in float.
#[derive(Clone, Debug)]
pub struct HardRoots<S> {
    pub alpha: S,
    pub a: S,
    pub candidates: Vec<(C64, C64)>,
}

fn normalized_arg(x: C64) -> f64 {
    let t = x.arg();
    if t < 0.0 {
        t + 2.0 * std::f64::consts::PI
    } else {
        t
    }
}

/// Index of the pair preferred by the root convention: `arg alpha` in
/// `(-pi/2r, pi/2r]` first, then the smallest nonnegative `arg a`.
pub fn pick_root(candidates: &[(C64, C64)], r: u32) -> Option<usize> {
    let half = std::f64::consts::PI / (2.0 * r as f64);
    let eps = 1e-12;
    let in_window = |al: C64| {
        let t = al.arg();
        t > -half + eps && t <= half + eps
    };
    let key = |i: usize| {
        let (al, a) = candidates[i];
        let outside = if in_window(al) { 0.0 } else { al.arg().abs() };
        (outside, normalized_arg(a))
    };
    (0..candidates.len()).min_by(|&i, &j| {
        let (a0, a1) = key(i);
        let (b0, b1) = key(j);
        a0.partial_cmp(&b0).unwrap().then(a1.partial_cmp(&b1).unwrap())
    })
}

/// Solves `b10 / alpha = a^n A / n` and `a^(n-1) A alpha^-r = -1`.
///
/// Eliminating `alpha` gives `a^(n(r+1)-1) = -(n b10)^r / A^(r+1)`.  In exact
/// mode only complex-rational roots are usable.
pub fn hard_roots<S: Scalar>(af: &AdaptedForm<S>, n: u32) -> Result<HardRoots<S>> {
    let r = af.r;
    let big_a = af.a(0, n - 1);
    let b10 = af.b(1, 0);
    if b10.is_zero() {
        return Err(Error::Hypothesis("b10 vanishes".into()));
    }
    if big_a.is_zero() {
        return Err(Error::Hypothesis("a_{0,n-1} vanishes".into()));
    }
    let deg = n * (r + 1) - 1;
    let nb = S::from_i64(n as i64) * b10.clone();
    let c = -(Scalar::powi(&nb, r as i64).unwrap() * Scalar::powi(&big_a, -(r as i64) - 1).unwrap());
    let alpha_of = |a: &S| nb.clone() * Scalar::inv(&(Scalar::powi(a, n as i64).unwrap() * big_a.clone())).unwrap();

    let exact: Vec<S> = match c.to_qc() {
        Some(q) => {
            let mut coeffs = vec![QC::zero(); deg as usize + 1];
            coeffs[0] = -q;
            coeffs[deg as usize] = QC::from_i64(1);
            exact_roots(&UPoly::new(coeffs))
                .rational
                .into_iter()
                .map(|(x, _)| S::from_qc(&x))
                .collect()
        }
        None => Vec::new(),
    };
    let (nbf, bigf) = (nb.to_c64(), big_a.to_c64());
    let candidates: Vec<(C64, C64)> = nth_roots(c.to_c64(), deg)
        .into_iter()
        .map(|a| (nbf / (a.powu(n) * bigf), a))
        .collect();

    let (alpha, a) = match S::MODE {
        crate::series::Mode::Float => {
            let i = pick_root(&candidates, r).unwrap();
            let a = S::from_c64(candidates[i].1).unwrap();
            (alpha_of(&a), a)
        }
        crate::series::Mode::Exact => {
            let pairs: Vec<(C64, C64)> = exact.iter().map(|a| (alpha_of(a).to_c64(), a.to_c64())).collect();
            let Some(i) = pick_root(&pairs, r) else {
                return Err(Error::Invalid(
                    "no complex-rational root for (alpha, a); use float mode".into(),
                ));
            };
            (alpha_of(&exact[i]), exact[i].clone())
        }
    };
    Ok(HardRoots { alpha, a, candidates })
}

/// Germ after the scaling and the shear.
#[derive(Clone)]
pub struct NormalizedGerm<S> {
    pub r: u32,
    pub n: u32,
    pub alpha: S,
    pub a: S,
    pub candidates: Vec<(C64, C64)>,
    /// The polynomial germ in the adapted chart.
    pub source: (Poly2<S>, Poly2<S>),
    pub f1: Series<S>,
    pub f2: Series<S>,
    /// `f^_2(u, 0) = u^(r+1+1/n) psi1(u)`.
    pub psi1: Series<S>,
    /// Highest ladder level the truncation supports.
    pub top: u32,
}

impl<S: Scalar> fmt::Debug for NormalizedGerm<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormalizedGerm")
            .field("r", &self.r)
            .field("n", &self.n)
            .field("alpha", &self.alpha)
            .field("a", &self.a)
            .finish()
    }
}

/// Checks the hard-case hypotheses and returns `n`.
pub fn hard_order<S: Scalar>(af: &AdaptedForm<S>) -> Result<u32> {
    let idx = residual_index(af)?;
    let n = idx.n;
    if n < 2 || idx.m != Some(n - 1) {
        return Err(Error::Hypothesis(format!(
            "not the hard case: m = {:?}, n = {n}",
            idx.m
        )));
    }
    let gap = idx.index.clone() - S::from_i64(n as i64);
    if !gap.negligible(HARD_TOL) {
        return Err(Error::Hypothesis(format!(
            "not the hard case: index {} differs from n = {n}",
            crate::germ::fmt_scalar(&idx.index)
        )));
    }
    Ok(n)
}

/// Polynomial truncation (weights in units of `z^(1/n)`, `w` of weight one)
/// needed for the ladder up to level `top`, plus the defect after it.
pub fn ladder_budget(r: u32, n: u32, top: u32) -> i64 {
    let (r, n, top) = (r as i64, n as i64, top as i64);
    n * (r + 1) + top + 2 * n + 1
}

/// Level of the last shift of the ladder proper.
pub fn ladder_top(n: u32) -> u32 {
    2 * n - 3
}

fn scaled_germ<S: Scalar>(f1: &Poly2<S>, f2: &Poly2<S>, alpha: &S) -> (Poly2<S>, Poly2<S>) {
    // f1bar(Z, W) = alpha f1(Z / alpha, W), f2bar(Z, W) = f2(Z / alpha, W)
    let ai = Scalar::inv(alpha).unwrap();
    let sc = |p: &Poly2<S>, outer: &S| {
        Poly2::from_terms(
            p.terms().map(|((i, j), c)| {
                (
                    (*i, *j),
                    c.clone() * Scalar::powi(&ai, *i as i64).unwrap() * outer.clone(),
                )
            }),
            p.trunc(),
        )
    };
    (sc(f1, alpha), sc(f2, &S::one()))
}

fn floor_for<S: Scalar>(s: &Series<S>) -> f64 {
    match S::MODE {
        crate::series::Mode::Exact => 0.0,
        crate::series::Mode::Float => HARD_TOL * (1.0 + s.max_abs()),
    }
}

/// `X` with `s1 = z (1 + X)`.
fn unit_part<S: Scalar>(s1: &Series<S>) -> Result<Series<S>> {
    let n = s1.ram() as i64;
    let one = Series::one(s1.ram(), s1.omega(), s1.ptrunc());
    Ok(s1.div_zpow(n)?.sub(&one))
}

/// Scales, shears and checks the resulting shape.
pub fn normalize<S: Scalar>(af: &AdaptedForm<S>) -> Result<NormalizedGerm<S>> {
    normalize_with(af, 0)
}

/// As [`normalize`], keeping enough terms for `extra` ladder levels past
/// `2n - 3` (the formal expansion of the invariant curve).
pub fn normalize_with<S: Scalar>(af: &AdaptedForm<S>, extra: u32) -> Result<NormalizedGerm<S>> {
    let n = hard_order(af)?;
    let r = af.r;
    let top = ladder_top(n) + extra;
    let need = ladder_budget(r, n, top) as u32;
    let known = (af.a0.trunc().saturating_add(r + 1)).min(af.b1.trunc().saturating_add(r));
    if known < need && af.a0.trunc() < POLY_TRUNC {
        return Err(Error::TruncationExhausted {
            op: "normalize",
            need: need as i64,
            have: known as i64,
        });
    }
    let g = af.germ(need);
    let roots = hard_roots(af, n)?;
    let (p1, p2) = scaled_germ(&g.f1, &g.f2, &roots.alpha);

    let s1 = Series::from_poly2(&p1, n, 1);
    let s2 = Series::from_poly2(&p2, n, 1);
    let pt = s1.ptrunc();
    let shear = Series::monomial(roots.a.clone(), 1, 0, 1, n, 1, pt);
    let w = Series::monomial(S::one(), 0, 1, 0, n, 1, pt);
    let sw = w.add(&shear);
    let f1 = s1.subst_w(&sw)?;
    let x = unit_part(&f1)?;
    let f2 = s2.subst_w(&sw)?.sub(&shear.compose_z(&x)?);
    let pt = f2.ptrunc().min(f1.ptrunc());
    let (f1, f2) = (f1.truncate(pt), f2.truncate(pt));

    let fl = floor_for(&f2);
    let (f1, f2) = (f1.chop(floor_for(&f1)), f2.chop(fl));
    let p_psi = n as i64 * (r as i64 + 1) + 1;
    let base = f2.coeff_w(0);
    if let Some(v) = base.z_valuation(fl) {
        if v < p_psi {
            return Err(Error::Hypothesis(format!(
                "f2(u, 0) has a term z^({v}/{n}) below the expected order"
            )));
        }
    }
    let psi1 = base.div_zpow(p_psi)?;
    let ng = NormalizedGerm {
        r,
        n,
        alpha: roots.alpha,
        a: roots.a,
        candidates: roots.candidates,
        source: (g.f1.clone(), g.f2.clone()),
        f1,
        f2,
        psi1,
        top,
    };
    ng.check_shape()?;
    Ok(ng)
}

/// One displayed coefficient: where it sits and its expected value.
#[derive(Clone, Debug)]
pub struct ShapeEntry<S> {
    pub label: &'static str,
    pub p: i64,
    pub k: u32,
    pub e: i64,
    pub expected: S,
    pub found: S,
}

impl<S: Scalar> NormalizedGerm<S> {
    /// The leading coefficients fixed by the choice of `(alpha, a)`.
    pub fn shape(&self) -> Vec<ShapeEntry<S>> {
        let (n, r) = (self.n as i64, self.r as i64);
        let ai = Scalar::inv(&self.a).unwrap();
        let nm1 = S::from_i64(n - 1);
        let q = |num: i64| S::from_ratio(num, n);
        let mut out = Vec::new();
        let mut push = |label, s: &Series<S>, p, k, e, expected: S| {
            let found = s.coeff(p, k).coeff(e);
            out.push(ShapeEntry {
                label,
                p,
                k,
                e,
                expected,
                found,
            });
        };
        let p_top = n * (r + 1) + n - 1;
        push("f1: z^(r+1+(n-1)/n) t^(n-1)", &self.f1, p_top, 0, n - 1, -S::one());
        push(
            "f1: z^(r+1+(n-2)/n) w t^(n-2)",
            &self.f1,
            p_top - 1,
            1,
            n - 2,
            -(nm1.clone() * ai.clone()),
        );
        let p_w = n * r + n - 1;
        push("f2/w: z^(r+(n-1)/n) t^(n-1)", &self.f2, p_w, 1, n - 1, -q(1));
        push("f2/w: z^(r+(n-1)/n) t^-1", &self.f2, p_w, 1, -1, q(n - 1));
        push(
            "f2/w: z^(r+(n-2)/n) w t^(n-2)",
            &self.f2,
            p_w - 1,
            2,
            n - 2,
            -(q(n - 1) * ai),
        );
        out
    }

    pub fn check_shape(&self) -> Result<()> {
        for e in self.shape() {
            let d = e.found.clone() - e.expected.clone();
            if !d.negligible(HARD_TOL * (1.0 + e.expected.magnitude())) {
                return Err(Error::Hypothesis(format!(
                    "normal form coefficient {} is {} instead of {}",
                    e.label,
                    crate::germ::fmt_scalar(&e.found),
                    crate::germ::fmt_scalar(&e.expected)
                )));
            }
        }
        Ok(())
    }

    /// `R_1^1`, the leading Laurent coefficient of `psi1`.
    pub fn r11(&self) -> Laurent1<S> {
        self.psi1.coeff(0, 0)
    }

    pub fn to_float(&self) -> NormalizedGerm<C64> {
        NormalizedGerm {
            r: self.r,
            n: self.n,
            alpha: self.alpha.to_c64(),
            a: self.a.to_c64(),
            candidates: self.candidates.clone(),
            source: (self.source.0.to_float(), self.source.1.to_float()),
            f1: self.f1.to_float(),
            f2: self.f2.to_float(),
            psi1: self.psi1.to_float(),
            top: self.top,
        }
    }
}

/// Coefficients of `t^-(n-1) Q' + (A + B t^-n) Q = -n t^-(n-1) R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OdeForm {
    /// `A = (n-1)(h+1)`, `B = n-1`.
    Stated,
    /// `A = h+1`, `B = n-1`: the linearization of the defect.
    Linearized,
}

impl OdeForm {
    pub fn coefficients(self, h: u32, n: u32) -> (i64, i64) {
        let (h, n) = (h as i64, n as i64);
        match self {
            OdeForm::Stated => ((n - 1) * (h + 1), n - 1),
            OdeForm::Linearized => (h + 1, n - 1),
        }
    }
}

/// The formal solution `Q = T(t) + sum_k d_-k t^-k` of
/// `t^-(n-1) Q' + (A + B t^-n) Q = -n t^-(n-1) R`, with `T` a polynomial.
///
/// Multiplying by `t^(n-1)`, the coefficient of `t^j` reads
/// `(j+1+B) d_(j+1) + A d_(j-n+1) = -n c_j`, solved downwards from the
/// top degree of `R`.  `depth` caps the principal part.
pub fn solve_ode_with<S: Scalar>(a: i64, b: i64, n: u32, rhs: &Laurent1<S>, depth: i64) -> Laurent1<S> {
    assert!(a != 0, "leading coefficient must not vanish");
    let n = n as i64;
    let Some(top) = rhs.degree() else {
        return Laurent1::zero(depth.min(rhs.depth()));
    };
    let depth = depth.min(rhs.depth().saturating_add(n - 1));
    let ai = S::from_ratio(1, a);
    let hi = top - n + 1;
    let mut q = Laurent1::zero(depth);
    let mut e = hi;
    while e >= -depth {
        let acc = S::from_i64(-n) * rhs.coeff(e + n - 1) - S::from_i64(e + n + b) * q.coeff(e + n);
        q.set(e, acc * ai.clone());
        e -= 1;
    }
    q
}

/// The formal solution for level `h` with the stated coefficients.
pub fn solve_formal_ode<S: Scalar>(h: u32, n: u32, rhs: &Laurent1<S>, depth: i64) -> Laurent1<S> {
    let (a, b) = OdeForm::Stated.coefficients(h, n);
    solve_ode_with(a, b, n, rhs, depth)
}

/// `t^-(n-1) Q' + (A + B t^-n) Q + n t^-(n-1) R`, on the exponents where all
/// three terms are known.
pub fn ode_residual<S: Scalar>(a: i64, b: i64, n: u32, q: &Laurent1<S>, rhs: &Laurent1<S>) -> Laurent1<S> {
    let n64 = n as i64;
    let lhs = q
        .derivative()
        .mul_tpow(1 - n64)
        .add(&q.scale(&S::from_i64(a)))
        .add(&q.mul_tpow(-n64).scale(&S::from_i64(b)));
    let out = lhs.add(&rhs.mul_tpow(1 - n64).scale(&S::from_i64(n64)));
    // Known exponents of the sum: the tightest depth among the pieces.
    out.with_depth(out.depth())
}

/// Largest magnitude in a residual, 0 when it is exactly zero.
pub fn residual_size<S: Scalar>(l: &Laurent1<S>) -> f64 {
    l.max_abs()
}

/// One rung of the ladder.
#[derive(Clone)]
pub struct LadderLevel<S> {
    pub h: u32,
    /// `R_1^(h+1)`: leading coefficient of the defect before the shift.
    pub rhs: Laurent1<S>,
    pub q: Laurent1<S>,
    /// `p` of the defect before and after the shift (units of `z^(1/n)`).
    pub order_before: Option<i64>,
    pub order_after: Option<i64>,
    /// Size of the ODE residual of `q`.
    pub residual: f64,
}

impl<S: Scalar> LadderLevel<S> {
    /// Whether the shift raised the order by exactly one step.
    pub fn gains_one(&self) -> bool {
        matches!((self.order_before, self.order_after), (Some(a), Some(b)) if b == a + 1)
    }
}

impl<S: Scalar> fmt::Debug for LadderLevel<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LadderLevel")
            .field("h", &self.h)
            .field("rhs", &self.rhs)
            .field("q", &self.q)
            .field("order_before", &self.order_before)
            .field("order_after", &self.order_after)
            .field("residual", &self.residual)
            .finish()
    }
}

/// Exponent `p / n` kept as a fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frac {
    pub num: i64,
    pub den: i64,
}

impl Frac {
    pub fn new(num: i64, den: i64) -> Self {
        let g = num_integer::gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Frac {
            num: s * num / g,
            den: s * den / g,
        }
    }
    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[derive(Clone)]
pub struct Ladder<S> {
    pub form: OdeForm,
    pub depth: i64,
    pub levels: Vec<LadderLevel<S>>,
    /// `w_(2n-2)(z) = sum_(h <= 2n-3) z^((h+2)/n) Q_h`.
    pub shift: Series<S>,
    /// `sum_(h > 2n-3) z^((h+2)/n) Q_h`: the formal expansion of the
    /// invariant curve in the coordinate `w - w_(2n-2)`.
    pub tail: Series<S>,
    /// Leading coefficient `R_1^(2n-1)` of the final defect.
    pub final_rhs: Laurent1<S>,
    /// Exponent `i` of the new coordinate.
    pub i_exp: Frac,
    /// Exponent `J` of the logarithm in the remaining defect.
    pub j_exp: Frac,
}

impl<S: Scalar> fmt::Debug for Ladder<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ladder")
            .field("form", &self.form)
            .field("levels", &self.levels)
            .field("i", &self.i_exp)
            .field("J", &self.j_exp)
            .finish()
    }
}

/// `f^_2(z, w(z)) - w(f^_1(z, w(z)))` for a series `w` in `z` alone.
pub fn defect<S: Scalar>(ng: &NormalizedGerm<S>, w: &Series<S>) -> Result<Series<S>> {
    let f1 = ng.f1.subst_w(w)?;
    let f2 = ng.f2.subst_w(w)?;
    if w.is_zero() {
        return Ok(f2);
    }
    let x = unit_part(&f1)?;
    let moved = w.compose_z(&x)?;
    let pt = f2.ptrunc().min(moved.ptrunc());
    Ok(f2.sub(&moved).truncate(pt))
}

/// Per-exponent size of the coefficients feeding a float computation:
/// `level(e)` is the largest magnitude met at exponents `>= e`.  Rounding
/// errors at `t^e` are measured against it, since the principal parts of the
/// formal solutions grow quickly with depth.
#[derive(Clone, Debug, Default)]
pub struct Envelope {
    top: std::collections::BTreeMap<i64, f64>,
}

impl Envelope {
    pub fn add<S: Scalar>(&mut self, l: &Laurent1<S>) {
        for (e, c) in l.terms() {
            let m = self.top.entry(e).or_insert(0.0);
            *m = m.max(c.magnitude());
        }
    }

    pub fn add_series<S: Scalar>(&mut self, s: &Series<S>) {
        for (_, l) in s.terms() {
            self.add(l);
        }
    }

    pub fn level(&self, e: i64) -> f64 {
        1.0 + self.top.range(e..).map(|(_, m)| *m).fold(0.0, f64::max)
    }

    /// Drops coefficients that are rounding noise (float mode only).
    pub fn chop<S: Scalar>(&self, l: &Laurent1<S>) -> Laurent1<S> {
        if S::MODE == crate::series::Mode::Exact {
            return l.clone();
        }
        Laurent1::from_terms(
            l.terms()
                .filter(|(e, c)| c.magnitude() > HARD_TOL * self.level(*e))
                .map(|(e, c)| (e, c.clone())),
            l.depth(),
        )
    }

    /// Smallest `p` with a coefficient above the noise level.
    pub fn z_valuation<S: Scalar>(&self, d: &Series<S>) -> Option<i64> {
        d.terms()
            .filter(|(_, l)| !self.chop(l).is_zero())
            .map(|((p, _), _)| *p)
            .min()
    }
}

/// Exponent read off a Laurent coefficient: the top degree of its polynomial
/// part when nonzero, otherwise minus the first principal exponent.
fn lead_exponent<S: Scalar>(l: &Laurent1<S>) -> Option<i64> {
    let poly = l.polynomial_part();
    if let Some(d) = poly.degree() {
        return Some(d);
    }
    l.principal_part().degree()
}

/// Runs the shifts `h = 0, ..., ng.top`; `i` and `J` come from the first
/// `2n - 2` of them.
pub fn shift_ladder<S: Scalar>(ng: &NormalizedGerm<S>, form: OdeForm, depth: i64) -> Result<Ladder<S>> {
    let (n, r) = (ng.n, ng.r);
    let p0 = n as i64 * (r as i64 + 1);
    let pt = ng.f1.ptrunc();
    let mut w = Series::zero(n, 1, pt);
    let mut levels = Vec::new();
    let mut env = Envelope::default();
    env.add_series(&ng.f1);
    env.add_series(&ng.f2);
    let mut d = defect(ng, &w)?;
    let last = ladder_top(n);
    let final_p = p0 + 2 * n as i64 - 1;
    let mut shift = None;
    let mut final_rhs = None;
    for h in 0..=ng.top {
        let order_before = env.z_valuation(&d);
        let target = p0 + h as i64 + 1;
        if d.ptrunc() < target + 1 {
            return Err(Error::TruncationExhausted {
                op: "shift_ladder",
                need: target + 1,
                have: d.ptrunc(),
            });
        }
        let rhs = env.chop(&d.coeff(target, 0));
        env.add(&rhs);
        let (a, b) = form.coefficients(h, n);
        let q = solve_ode_with(a, b, n, &rhs, depth);
        env.add(&q);
        let res = ode_residual(a, b, n, &q, &rhs);
        let residual = match S::MODE {
            crate::series::Mode::Exact => residual_size(&res),
            crate::series::Mode::Float => res
                .terms()
                .map(|(e, c)| c.magnitude() / env.level(e))
                .fold(0.0, f64::max),
        };
        w = w.add(&Series::term(q.clone(), h as i64 + 2, 0, n, 1, pt));
        d = defect(ng, &w)?;
        let order_after = env.z_valuation(&d);
        if h == last {
            shift = Some(w.clone());
            final_rhs = Some(env.chop(&d.coeff(final_p, 0)));
        }
        levels.push(LadderLevel {
            h,
            rhs,
            q,
            order_before,
            order_after,
            residual,
        });
    }
    let shift = shift.expect("top >= 2n - 3");
    let final_rhs = final_rhs.expect("top >= 2n - 3");
    let tail = w.sub(&shift);
    let nn = n as i64;
    let big_i = lead_exponent(&levels[0].q).unwrap_or(0);
    let i_exp = if big_i > nn {
        Frac::new(big_i, nn)
    } else {
        Frac::new(1, 1)
    };
    let j_exp = Frac::new(lead_exponent(&final_rhs).unwrap_or(0), nn);
    Ok(Ladder {
        form,
        depth,
        levels,
        shift,
        tail,
        final_rhs,
        i_exp,
        j_exp,
    })
}

impl<S: Scalar> Ladder<S> {
    /// The same ladder with the principal parts of the shift cut below
    /// `t^-depth`.  Numeric work sums the shift as a finite Laurent
    /// polynomial, and the formal solutions diverge, so a short cut keeps it
    /// an accurate change of coordinates at moderate `|Z|`.
    pub fn with_shift_depth(&self, depth: i64) -> Self {
        let mut shift = Series::zero(self.shift.ram(), self.shift.omega(), self.shift.ptrunc());
        for ((p, k), l) in self.shift.terms() {
            shift.add_laurent(*p, *k, l.with_depth(depth));
        }
        Ladder { shift, ..self.clone() }
    }
}

/// Default ladder: the linearized equation at the default depth.
pub fn default_ladder<S: Scalar>(ng: &NormalizedGerm<S>) -> Result<Ladder<S>> {
    shift_ladder(ng, OdeForm::Linearized, DEFAULT_DEPTH)
}

/// Evaluates a Laurent series in `t`, stopping the principal part once its
/// terms stop decreasing.
pub fn eval_asymptotic<S: Scalar>(l: &Laurent1<S>, t: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    let mut last = f64::INFINITY;
    for (e, c) in l.terms().collect::<Vec<_>>().into_iter().rev() {
        let term = c.to_c64() * t.powi(e as i32);
        if e < 0 {
            let m = term.norm();
            if m > last {
                break;
            }
            last = m;
        }
        acc += term;
    }
    acc
}

/// `sum z^(p/n) L_p(t)` for a series in `z` alone, on the given branch.
pub fn eval_z_series<S: Scalar>(s: &Series<S>, z: C64, br: &Branch) -> C64 {
    let n = s.ram();
    let t = br.t(z, n);
    let logz = br.log(z);
    let mut acc = C64::new(0.0, 0.0);
    for ((p, k), l) in s.terms() {
        debug_assert_eq!(*k, 0);
        let zp = (logz * (*p as f64 / n as f64)).exp();
        acc += zp * eval_asymptotic(l, t);
    }
    acc
}

/// The germ in the coordinate `W = w - w_(2n-2)(z)`, and the function
/// `H(z, W) = W - (z / z1)^(1/n) W1` of the fixed-point operator.
#[derive(Clone)]
pub struct ShiftedGerm<S> {
    pub r: u32,
    pub n: u32,
    pub f1: Series<S>,
    pub f2: Series<S>,
    pub h: Series<S>,
}

impl<S: Scalar> fmt::Debug for ShiftedGerm<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftedGerm")
            .field("r", &self.r)
            .field("n", &self.n)
            .field("ptrunc", &self.h.ptrunc())
            .finish()
    }
}

/// The same series with every Laurent coefficient read as a finite sum.
fn finite<S: Scalar>(s: &Series<S>) -> Series<S> {
    let mut out = Series::zero(s.ram(), s.omega(), s.ptrunc());
    for ((p, k), l) in s.terms() {
        out.add_laurent(
            *p,
            *k,
            Laurent1::from_terms(l.terms().map(|(e, c)| (e, c.clone())), EXACT),
        );
    }
    out
}

/// The germ after the formal shift: Laurent coefficients keep their depth,
/// so what lies past the ladder's depth stays unknown.
pub fn shifted_germ<S: Scalar>(ng: &NormalizedGerm<S>, ladder: &Ladder<S>) -> Result<ShiftedGerm<S>> {
    shift_by(ng, &ladder.shift)
}

/// The germ after the shift read as a finite sum, which is an actual change
/// of coordinates; this is what [`HardMap`] evaluates.
pub fn shifted_germ_finite<S: Scalar>(ng: &NormalizedGerm<S>, ladder: &Ladder<S>) -> Result<ShiftedGerm<S>> {
    shift_by(ng, &finite(&ladder.shift))
}

fn shift_by<S: Scalar>(ng: &NormalizedGerm<S>, shift: &Series<S>) -> Result<ShiftedGerm<S>> {
    let n = ng.n;
    let pt = ng.f1.ptrunc();
    let w = Series::monomial(S::one(), 0, 1, 0, n, 1, pt);
    let s = shift.truncate(pt);
    let ws = w.add(&s);
    let f1 = ng.f1.subst_w(&ws)?;
    let x = unit_part(&f1)?;
    let moved = if s.is_zero() {
        Series::zero(n, 1, pt)
    } else {
        s.compose_z(&x)?
    };
    let f2 = ng.f2.subst_w(&ws)?.sub(&moved);
    let pt = f1.ptrunc().min(f2.ptrunc());
    let (f1, f2) = (f1.truncate(pt), f2.truncate(pt));
    let x = unit_part(&f1)?;
    let h = w.truncate(pt).sub(&x.binomial(-1, n as i64)?.mul(&f2));
    Ok(ShiftedGerm { r: ng.r, n, f1, f2, h })
}

/// Outcome of the order bounds on `H`.
#[derive(Clone, Debug)]
pub struct HShape {
    /// `p` of the lowest term of `H(z, 0)`, expected `n (r + 2) + n - 1`.
    pub pure_valuation: Option<i64>,
    pub pure_expected: i64,
    /// `p` of the lowest `W`-linear term, expected `n r + n - 1`.
    pub linear_valuation: Option<i64>,
    pub linear_expected: i64,
    /// That term is `c t^-1` with `c = -(n-1)/n`.
    pub linear_coeff: C64,
    pub linear_is_t_inverse: bool,
}

impl HShape {
    pub fn holds(&self) -> bool {
        let pure = self.pure_valuation.is_none_or(|v| v >= self.pure_expected);
        let lin = self.linear_valuation == Some(self.linear_expected) && self.linear_is_t_inverse;
        pure && lin
    }
}

impl<S: Scalar> ShiftedGerm<S> {
    pub fn h_shape(&self) -> HShape {
        let (n, r) = (self.n as i64, self.r as i64);
        let fl = floor_for(&self.h);
        let pure = self.h.coeff_w(0);
        let lin = self.h.coeff_w(1);
        let lv = lin.z_valuation(fl);
        let (coeff, only) = match lv {
            Some(p) => {
                let l = lin.coeff(p, 0).chop(fl);
                let c = l.coeff(-1);
                let others = l.terms().filter(|(e, _)| *e != -1).count();
                (c.to_c64(), others == 0)
            }
            None => (C64::new(0.0, 0.0), false),
        };
        let expected = -(n - 1) as f64 / n as f64;
        HShape {
            pure_valuation: pure.z_valuation(fl),
            pure_expected: n * (r + 2) + n - 1,
            linear_valuation: lv,
            linear_expected: n * r + n - 1,
            linear_coeff: coeff,
            linear_is_t_inverse: only && (coeff.re - expected).abs() + coeff.im.abs() < 1e-9,
        }
    }
}

/// Float evaluation of the normalized map by conjugating the polynomial germ:
/// `z = Z / alpha`, `w = W + w_(2n-2)(Z) + a Z^(1/n) (log Z)^(1/n)`.
#[derive(Clone, Debug)]
pub struct HardMap {
    pub r: u32,
    pub n: u32,
    pub alpha: C64,
    pub a: C64,
    pub branch: Branch,
    f1: Vec<(u32, u32, C64)>,
    f2: Vec<(u32, u32, C64)>,
    deg: (u32, u32),
    shift: Vec<(f64, Laurent1<C64>)>,
    tail: Vec<(f64, Laurent1<C64>)>,
}

/// Point data reused between steps: `Z`, `log Z`, `log log Z` (with
/// `arg log Z` in `(0, 2 pi]`), `Z^(1/n)` and `t = (log Z)^(1/n)`.
#[derive(Clone, Copy, Debug)]
pub struct Base {
    pub z: C64,
    pub log: C64,
    pub log_l: C64,
    pub root: C64,
    pub t: C64,
}

impl Base {
    pub fn new(z: C64, branch: &Branch, n: u32) -> Self {
        let log = branch.log(z);
        let log_l = log_of_log(log);
        let n = n as f64;
        Base {
            z,
            log,
            log_l,
            root: (log / n).exp(),
            t: (log_l / n).exp(),
        }
    }
}

/// `log L` with `arg L` in `(0, 2 pi]`, the convention of `t`.
pub fn log_of_log(l: C64) -> C64 {
    let mut a = l.im.atan2(l.re);
    if a <= 0.0 {
        a += 2.0 * std::f64::consts::PI;
    }
    C64::new(l.norm().ln(), a)
}

impl HardMap {
    pub fn new<S: Scalar>(ng: &NormalizedGerm<S>, ladder: &Ladder<S>, branch: Branch) -> Self {
        let dense = |p: &Poly2<S>| -> Vec<(u32, u32, C64)> {
            p.terms()
                .map(|((i, j), c)| (*i, *j, c.to_c64()))
                .filter(|t| t.2.norm() > 0.0)
                .collect()
        };
        let f1 = dense(&ng.source.0);
        let f2 = dense(&ng.source.1);
        let di = f1.iter().chain(&f2).map(|t| t.0).max().unwrap_or(0);
        let dj = f1.iter().chain(&f2).map(|t| t.1).max().unwrap_or(0);
        let n = ng.n as f64;
        let flat = |s: &Series<S>| -> Vec<(f64, Laurent1<C64>)> {
            s.terms()
                .map(|((p, _), l)| (*p as f64 / n, l.map(|c| c.to_c64())))
                .collect()
        };
        HardMap {
            r: ng.r,
            n: ng.n,
            alpha: ng.alpha.to_c64(),
            a: ng.a.to_c64(),
            branch,
            f1,
            f2,
            deg: (di, dj),
            shift: flat(&ladder.shift),
            tail: flat(&ladder.tail),
        }
    }

    pub fn base(&self, z: C64) -> Base {
        Base::new(z, &self.branch, self.n)
    }

    /// `w_(2n-2)(Z)`, summed in full: a finite truncation of the shift is an
    /// honest change of coordinates, so it is evaluated exactly as stored.
    pub fn shift_at(&self, b: &Base) -> C64 {
        self.shift.iter().map(|(q, l)| (b.log * *q).exp() * l.eval(b.t)).sum()
    }

    /// The formal expansion of the invariant curve at `Z`, with each
    /// principal part cut at its smallest term.
    pub fn formal_curve(&self, b: &Base) -> C64 {
        self.tail
            .iter()
            .map(|(q, l)| (b.log * *q).exp() * eval_asymptotic(l, b.t))
            .sum()
    }

    /// `a Z^(1/n) t + w_(2n-2)(Z)`: what is added to `W` to get `w`.
    pub fn offset(&self, b: &Base) -> C64 {
        self.a * b.root * b.t + self.shift_at(b)
    }

    pub fn to_original(&self, b: &Base, w: C64) -> (C64, C64) {
        (b.z / self.alpha, w + self.offset(b))
    }

    pub fn poly_eval(&self, z: C64, w: C64) -> (C64, C64) {
        const CAP: usize = 24;
        let (di, dj) = (self.deg.0 as usize, self.deg.1 as usize);
        if di >= CAP || dj >= CAP {
            let ev = |t: &[(u32, u32, C64)]| t.iter().map(|(i, j, c)| c * z.powu(*i) * w.powu(*j)).sum();
            return (ev(&self.f1), ev(&self.f2));
        }
        let mut zp = [C64::new(1.0, 0.0); CAP];
        let mut wp = [C64::new(1.0, 0.0); CAP];
        for i in 1..=di {
            zp[i] = zp[i - 1] * z;
        }
        for j in 1..=dj {
            wp[j] = wp[j - 1] * w;
        }
        let ev = |t: &[(u32, u32, C64)]| t.iter().map(|(i, j, c)| c * zp[*i as usize] * wp[*j as usize]).sum();
        (ev(&self.f1), ev(&self.f2))
    }

    /// One step of the normalized map: `(Z, W) -> (Z1, W1)`.
    pub fn step(&self, b: &Base, w: C64) -> (Base, C64) {
        let (z, ww) = self.to_original(b, w);
        let (z1, w1) = self.poly_eval(z, ww);
        let b1 = self.base(self.alpha * z1);
        (b1, w1 - self.offset(&b1))
    }

    /// `H(Z, W) = W - (Z / Z1)^(1/n) W1`.
    pub fn h(&self, b: &Base, w: C64) -> C64 {
        let (b1, w1) = self.step(b, w);
        w - b.root / b1.root * w1
    }
}
