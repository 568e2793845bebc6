//! Blow-up of the origin in coordinates and the lift of a germ to a chart.
//!
//! Charts are always arranged so that the exceptional divisor `S` is
//! `{first coordinate = 0}`:
//!
//! * `U1` at `[1:c]`: coordinates `(u, t)` with `z = u`, `w = u (t + c)`.
//! * `U2` at `[c:1]`: coordinates `(s, x)` with `z = (x + c) s`, `w = s`.
//!
//! The linear chain uses the unswapped second chart `(x, y)`, `z = x y`,
//! `w = y`, so that `{x = 0}` stays the proper transform of the original
//! divisor and `{y = 0}` is the newest one.

use std::fmt;

use crate::error::{Error, Result};
use crate::germ::{Germ2, PointClass, Proj};
use crate::series::gcd::POLY_TRUNC;
use crate::series::{Coeff, Poly2, Scalar, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum ChartStep {
    /// `z = u`, `w = u (t + c)`.
    U1 { c: Coeff },
    /// `z = (x + c) s`, `w = s`, coordinates ordered `(s, x)`.
    U2 { c: Coeff },
    /// `z = x y`, `w = y`, coordinates ordered `(x, y)`; one chain step.
    Chain,
}

impl ChartStep {
    /// Projection of a point of this chart to the previous coordinates.
    pub fn project(&self, p: (C64, C64)) -> (C64, C64) {
        let (a, b) = p;
        match self {
            ChartStep::U1 { c } => (a, a * (b + c.to_c64())),
            ChartStep::U2 { c } => ((b + c.to_c64()) * a, a),
            ChartStep::Chain => (a * b, b),
        }
    }

    fn project_series<S: Scalar>(&self, trunc: u32) -> (Poly2<S>, Poly2<S>) {
        match self {
            ChartStep::U1 { c } => (Poly2::z(trunc), shifted::<S>(c, trunc)),
            ChartStep::U2 { c } => (shifted::<S>(c, trunc), Poly2::z(trunc)),
            ChartStep::Chain => (Poly2::monomial(S::one(), 1, 1, trunc), Poly2::w(trunc)),
        }
    }
}

/// `a b + c a` in chart coordinates `(a, b)`.
fn shifted<S: Scalar>(c: &Coeff, trunc: u32) -> Poly2<S> {
    Poly2::monomial(S::one(), 1, 1, trunc).add(&Poly2::monomial(coeff_as::<S>(c), 1, 0, trunc))
}

fn coeff_as<S: Scalar>(c: &Coeff) -> S {
    match c {
        Coeff::Exact(q) => S::from_qc(q),
        Coeff::Float(x) => S::from_c64(*x).expect("float center in exact mode"),
    }
}

impl fmt::Display for ChartStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChartStep::U1 { c } => write!(f, "U1[1:{c}]"),
            ChartStep::U2 { c } => write!(f, "U2[{c}:1]"),
            ChartStep::Chain => write!(f, "chain"),
        }
    }
}

/// Record of the blow-ups leading to a chart.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Chart {
    pub history: Vec<ChartStep>,
}

impl Chart {
    pub fn identity() -> Self {
        Chart::default()
    }

    pub fn push(&mut self, s: ChartStep) {
        self.history.push(s);
    }

    pub fn last(&self) -> Option<&ChartStep> {
        self.history.last()
    }

    pub fn describe(&self) -> String {
        if self.history.is_empty() {
            return "origin".into();
        }
        self.history
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" > ")
    }
}

/// Maps a point in chart coordinates back to the original coordinates.
pub fn push_forward_point(chart: &Chart, q: (C64, C64)) -> (C64, C64) {
    chart.history.iter().rev().fold(q, |p, s| s.project(p))
}

/// Which coordinate hyperplane of the chart is the most recent exceptional
/// divisor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    First,
    Second,
}

/// A germ lifted to a chart of a blow-up.
#[derive(Clone)]
pub struct LiftedGerm<S> {
    pub germ: Germ2<S>,
    pub chart: Chart,
    pub exceptional: Axis,
}

impl<S: Scalar> fmt::Debug for LiftedGerm<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} in chart {}", self.germ, self.chart.describe())
    }
}

impl<S: Scalar> LiftedGerm<S> {
    /// A germ already given in an adapted chart (`S = {z = 0}`).
    pub fn adapted(germ: Germ2<S>) -> Self {
        LiftedGerm {
            germ,
            chart: Chart::identity(),
            exceptional: Axis::First,
        }
    }

    /// The germ in coordinates where the exceptional divisor is `{z = 0}`.
    pub fn adapted_germ(&self) -> Germ2<S> {
        match self.exceptional {
            Axis::First => self.germ.clone(),
            Axis::Second => Germ2 {
                f1: self.germ.f2.swap(),
                f2: self.germ.f1.swap(),
                exact_poly: self.germ.exact_poly,
            },
        }
    }

    /// `f|_S = id_S` to the truncation degree.
    pub fn fixes_divisor(&self) -> bool {
        let g = self.adapted_germ();
        g.g().restrict_z0().is_empty() && g.h().restrict_z0().is_empty()
    }
}

fn lift_step<S: Scalar>(f: &Germ2<S>, step: &ChartStep) -> Result<Germ2<S>> {
    let n = f.trunc();
    if n < 3 {
        return Err(Error::TruncationExhausted {
            op: "blow_up",
            need: 3,
            have: n as i64,
        });
    }
    let (lz, lw) = step.project_series::<S>(n);
    let f1 = f.f1.with_trunc(n).compose(&lz, &lw)?;
    let f2 = f.f2.with_trunc(n).compose(&lz, &lw)?;
    let (a, b) = match step {
        ChartStep::U1 { c } => {
            let c = coeff_as::<S>(c);
            let q = f2.div_z_pow(1)?.mul(&f1.div_z_pow(1)?.series_inverse()?);
            (f1, q.sub(&Poly2::constant(c, q.trunc())))
        }
        ChartStep::U2 { c } => {
            let c = coeff_as::<S>(c);
            let q = f1.div_z_pow(1)?.mul(&f2.div_z_pow(1)?.series_inverse()?);
            (f2, q.sub(&Poly2::constant(c, q.trunc())))
        }
        ChartStep::Chain => {
            let q = f1.div_monomial(0, 1)?.mul(&f2.div_monomial(0, 1)?.series_inverse()?);
            (q, f2)
        }
    };
    let t = a.trunc().min(b.trunc());
    Ok(Germ2 {
        f1: a.truncate(t),
        f2: b.truncate(t),
        exact_poly: false,
    })
}

fn step_for<S: Scalar>(center: &Proj<S>) -> ChartStep {
    match center {
        Proj::Affine(c) => ChartStep::U1 { c: Coeff::of(c) },
        Proj::Infinity => ChartStep::U2 {
            c: Coeff::of(&S::zero()),
        },
    }
}

/// The lift `f~` of `f` to the chart centered at `center`, with
/// `pi o f~ = f o pi`.  The truncation degree drops by one.
pub fn blow_up<S: Scalar>(f: &Germ2<S>, center: &Proj<S>) -> Result<LiftedGerm<S>> {
    blow_up_in(f, step_for(center))
}

/// Blow-up in an explicitly chosen chart; `U2 { c }` centers the second
/// chart at `[c:1]`, which lets a point with both coordinates nonzero be
/// seen from both charts.
pub fn blow_up_in<S: Scalar>(f: &Germ2<S>, step: ChartStep) -> Result<LiftedGerm<S>> {
    if step == ChartStep::Chain {
        return Err(Error::Invalid("chain steps act on adapted charts".into()));
    }
    let germ = lift_step(f, &step)?;
    let mut chart = Chart::identity();
    chart.push(step);
    Ok(LiftedGerm {
        germ,
        chart,
        exceptional: Axis::First,
    })
}

/// `(pi o f~, f o pi)` for a lift, both truncated to the lift's degree.
pub fn pi_identity<S: Scalar>(f: &Germ2<S>, lifted: &LiftedGerm<S>) -> Result<[(Poly2<S>, Poly2<S>); 2]> {
    let step = lifted
        .chart
        .last()
        .ok_or_else(|| Error::Invalid("no blow-up recorded".into()))?;
    let n = lifted.germ.trunc();
    let (pz, pw) = step.project_series::<S>(f.trunc());
    let lhs = {
        let g1 = lifted.germ.f1.clone();
        let g2 = lifted.germ.f2.clone();
        match step {
            ChartStep::U1 { c } => {
                let c = coeff_as::<S>(c);
                (g1.clone(), g1.mul(&g2.add(&Poly2::constant(c, n))))
            }
            ChartStep::U2 { c } => {
                let c = coeff_as::<S>(c);
                (g2.add(&Poly2::constant(c, n)).mul(&g1), g1)
            }
            ChartStep::Chain => (g1.mul(&g2), g2),
        }
    };
    let rhs = (f.f1.compose(&pz, &pw)?, f.f2.compose(&pz, &pw)?);
    Ok([
        (lhs.0.truncate(n), rhs.0.truncate(n)),
        (lhs.1.truncate(n), rhs.1.truncate(n)),
    ])
}

/// The chain of blow-ups at `tau^j(p)`: `k` successive blow-ups of the
/// origin of an adapted chart, each time recentered at the intersection of
/// the new divisor with the proper transform of `S`.
pub fn linear_chain<S: Scalar>(f: &LiftedGerm<S>, k: usize) -> Result<LiftedGerm<S>> {
    let mut cur = f.adapted_germ();
    let mut chart = f.chart.clone();
    if k == 0 {
        return Ok(f.clone());
    }
    for j in 1..=k {
        cur = lift_step(&cur, &ChartStep::Chain)?;
        chart.push(ChartStep::Chain);
        if j < k && !looks_singular(&cur)? {
            return Err(Error::ChainTerminated {
                step: j,
                reason: "tau^j(p) is not a singular point".into(),
            });
        }
    }
    Ok(LiftedGerm {
        germ: cur,
        chart,
        exceptional: Axis::Second,
    })
}

/// After removing the common monomial factor of `f - id`, a point where one
/// of the cofactors is a unit is certainly not singular.
pub fn looks_singular<S: Scalar>(f: &Germ2<S>) -> Result<bool> {
    let g = f.g();
    let h = f.h();
    if g.is_zero() && h.is_zero() {
        return Ok(true);
    }
    let a = g
        .z_adic_valuation()
        .unwrap_or(u32::MAX)
        .min(h.z_adic_valuation().unwrap_or(u32::MAX));
    let b = g
        .w_adic_valuation()
        .unwrap_or(u32::MAX)
        .min(h.w_adic_valuation().unwrap_or(u32::MAX));
    let g0 = g.div_monomial(a, b)?.constant_term();
    let h0 = h.div_monomial(a, b)?.constant_term();
    Ok(g0.is_zero() && h0.is_zero())
}

/// Polynomial numerators `(G, H)` of `f~ - id` in the adapted chart at
/// `center`: `f~ - id = (G, H / unit)` with `unit(O) = 1`.  Exact inputs.
pub fn lifted_numerators<S: Scalar>(f: &Germ2<S>, center: &Proj<S>) -> Result<(Poly2<S>, Poly2<S>)> {
    let n = POLY_TRUNC;
    let step = step_for(center);
    let (lz, lw) = step.project_series::<S>(n);
    let f1 = f.f1.with_trunc(n).compose_polynomial(&lz, &lw);
    let f2 = f.f2.with_trunc(n).compose_polynomial(&lz, &lw);
    Ok(match step {
        ChartStep::U1 { c } => {
            // h~ = [f2 - (t + c) f1] / u / (f1 / u)
            let c = coeff_as::<S>(&c);
            let tc = Poly2::w(n).add(&Poly2::constant(c, n));
            let num = f2.sub(&tc.mul(&f1)).div_z_pow(1)?.with_trunc(n);
            (f1.sub(&Poly2::z(n)), num)
        }
        ChartStep::U2 { c } => {
            // coordinates (s, x): g~ = f2 - s, h~ = [f1 - (x + c) f2] / s / (f2 / s)
            let c = coeff_as::<S>(&c);
            let xc = Poly2::w(n).add(&Poly2::constant(c, n));
            let num = f1.sub(&xc.mul(&f2)).div_z_pow(1)?.with_trunc(n);
            (f2.sub(&Poly2::z(n)), num)
        }
        ChartStep::Chain => unreachable!(),
    })
}

/// Regularity of `f` along `[v]`: the blown-up germ has pure order one at
/// `[v]`.
#[derive(Clone, Debug)]
pub struct Regularity {
    pub regular: bool,
    pub class: Option<PointClass>,
    pub note: Option<String>,
}

pub fn is_regular_along<S: Scalar>(f: &Germ2<S>, v: &Proj<S>) -> Result<Regularity> {
    if f.is_dicritical()? {
        return Err(Error::Dicritical);
    }
    if !f.is_characteristic(v)? {
        return Ok(Regularity {
            regular: false,
            class: None,
            note: Some(format!("{v} is not characteristic; the lift is not singular there")),
        });
    }
    if !f.exact_poly {
        return Err(Error::Invalid("regularity needs complete polynomials".into()));
    }
    let (g, h) = lifted_numerators(f, v)?;
    let pc = crate::germ::classify_fixed_point(&g, &h)?;
    Ok(Regularity {
        regular: pc.pure_order == 1,
        class: Some(pc),
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::QC;

    fn q(n: i64) -> QC {
        QC::from_i64(n)
    }

    fn germ(g: &[((u32, u32), i64)], h: &[((u32, u32), i64)], n: u32) -> Germ2<QC> {
        let g = Poly2::from_terms(g.iter().map(|(e, c)| (*e, q(*c))), n);
        let h = Poly2::from_terms(h.iter().map(|(e, c)| (*e, q(*c))), n);
        Germ2::polynomial(g.add(&Poly2::z(n)), h.add(&Poly2::w(n))).unwrap()
    }

    #[test]
    fn quadratic_example_chart_one() {
        let f = germ(&[((2, 0), 1)], &[((0, 2), 1)], 8);
        let l = blow_up(&f, &Proj::x_axis()).unwrap();
        assert_eq!(l.germ.trunc(), 7);
        assert_eq!(
            l.germ.f1.truncate(7),
            Poly2::from_terms([((1, 0), q(1)), ((2, 0), q(1))], 7)
        );
        // t + u t (t - 1) (1 + u)^-1
        let u = Poly2::<QC>::z(7);
        let t = Poly2::<QC>::w(7);
        let expect = t.add(
            &u.mul(&t)
                .mul(&t.sub(&Poly2::one(7)))
                .mul(&Poly2::one(7).add(&u).series_inverse().unwrap()),
        );
        assert_eq!(l.germ.f2, expect);
        for (a, b) in pi_identity(&f, &l).unwrap() {
            assert_eq!(a, b);
        }
        assert!(l.fixes_divisor());
    }

    #[test]
    fn both_charts_satisfy_projection_identity() {
        let f = germ(
            &[((2, 0), 1), ((1, 1), -2), ((0, 3), 1)],
            &[((0, 2), 3), ((2, 1), 1)],
            8,
        );
        for c in [Proj::Affine(q(2)), Proj::Infinity] {
            let l = blow_up(&f, &c).unwrap();
            for (a, b) in pi_identity(&f, &l).unwrap() {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn push_forward_examples() {
        let mut ch = Chart::identity();
        let p = (C64::new(0.1, 0.0), C64::new(0.2, 0.0));
        assert_eq!(push_forward_point(&ch, p), p);
        ch.push(ChartStep::U1 { c: Coeff::Exact(q(0)) });
        let (z, w) = push_forward_point(&ch, p);
        assert!((z - 0.1).norm() < 1e-15 && (w - 0.02).norm() < 1e-15);
        ch.push(ChartStep::Chain);
        let (z2, w2) = push_forward_point(&ch, p);
        let (a, b) = (p.0 * p.1, p.1);
        let (z3, w3) = (a, a * b);
        assert!((z2 - z3).norm() < 1e-15 && (w2 - w3).norm() < 1e-15);
    }

    #[test]
    fn high_order_identity_loses_one_degree() {
        let f = germ(&[((5, 0), 1)], &[((3, 2), 1)], 9);
        let l = blow_up(&f, &Proj::Affine(q(1))).unwrap();
        assert!(l.germ.g().order().unwrap() >= 4);
        assert!(l.germ.h().order().unwrap() >= 4);
    }

    #[test]
    fn regularity_example_order_two() {
        // [1:0] characteristic iff b20 = 0
        let nondeg = germ(&[((2, 0), 1)], &[((1, 1), 3)], 6);
        assert!(is_regular_along(&nondeg, &Proj::x_axis()).unwrap().regular);
        let deg_b30 = germ(&[((0, 2), 1)], &[((1, 1), 1), ((3, 0), 1)], 6);
        assert!(is_regular_along(&deg_b30, &Proj::x_axis()).unwrap().regular);
        let deg_flat = germ(&[((0, 2), 1)], &[((1, 1), 1)], 6);
        assert!(!is_regular_along(&deg_flat, &Proj::x_axis()).unwrap().regular);
        let noncharacteristic = germ(&[((2, 0), 1)], &[((2, 0), 1)], 6);
        let r = is_regular_along(&noncharacteristic, &Proj::x_axis()).unwrap();
        assert!(!r.regular && r.note.is_some());
    }
}
