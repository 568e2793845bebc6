//! Property tests for the structural invariants of the series, germ, blow-up,
//! index, classification, normal form and petal layers.

use num_traits::Zero;
use parabolic_core::blowup::{blow_up, blow_up_in, linear_chain, push_forward_point, ChartStep};
use parabolic_core::classify::{classify, Case};
use parabolic_core::hard::{ode_residual, shift_ladder, OdeForm};
use parabolic_core::index::{adapted_form_of, residual_index, AdaptedForm};
use parabolic_core::petal::PetalDomain;
use parabolic_core::series::{
    Branch, Coeff, Laurent1, Poly2, RamifiedLogSeries, Rat, Scalar, C64, EXACT, POLY_TRUNC, QC,
};
use parabolic_core::{normalize, Error, Germ2, Proj};
use proptest::prelude::*;

fn rat() -> impl Strategy<Value = Rat> {
    (-5i64..=5, 1i64..=4).prop_map(|(p, q)| Rat::new(p.into(), q.into()))
}

fn nonzero_rat() -> impl Strategy<Value = Rat> {
    rat().prop_filter("nonzero", |r| !r.is_zero())
}

fn qc() -> impl Strategy<Value = QC> {
    (rat(), rat()).prop_map(|(a, b)| QC::new(a, b))
}

fn nonzero_qc() -> impl Strategy<Value = QC> {
    qc().prop_filter("nonzero", |c| !c.is_zero())
}

/// Terms of total degree in `lo..=hi`.
fn poly(lo: u32, hi: u32, max_terms: usize, trunc: u32) -> impl Strategy<Value = Poly2<QC>> {
    prop::collection::vec(((lo..=hi), 0u32..=16, qc()), 0..=max_terms).prop_map(move |ts| {
        let mut p = Poly2::zero(trunc);
        for (d, i, c) in ts {
            let i = i % (d + 1);
            p.add_term(i, d - i, c);
        }
        p
    })
}

fn germ(trunc: u32) -> impl Strategy<Value = Germ2<QC>> {
    (poly(2, trunc, 8, trunc), poly(2, trunc, 8, trunc)).prop_map(|(g, h)| Germ2::from_parts(g, h).unwrap())
}

fn q(x: i64) -> QC {
    QC::from_i64(x)
}

/// Adapted form with `B1(0, w) = w^n (nonzero + ...)` and `A0(0, w)` of order
/// `m` (or zero).
fn adapted(trunc: u32) -> impl Strategy<Value = AdaptedForm<QC>> {
    (
        1u32..=3,
        1u32..=4,
        poly(0, 4, 6, trunc),
        poly(1, 5, 6, trunc),
        nonzero_qc(),
        prop::collection::vec(qc(), 3),
    )
        .prop_map(move |(r, n, a0, mut b1, lead, tail)| {
            for j in 0..=8 {
                let c = b1.coeff(0, j);
                b1.add_term(0, j, -c);
            }
            b1.add_term(0, n, lead);
            for (k, c) in tail.into_iter().enumerate() {
                b1.add_term(0, n + 1 + k as u32, c);
            }
            AdaptedForm::new(r, a0, b1).unwrap()
        })
}

/// Hard case with `r = 1` whose normal form has the rational shear `a`:
/// `a_{0,n-1} = n b_{0,n}` and `b_{1,0} = -a^(2n-1) a_{0,n-1}^2 / n`.
fn hard_form() -> impl Strategy<Value = AdaptedForm<QC>> {
    (2u32..=3, nonzero_rat(), nonzero_rat(), prop::collection::vec(qc(), 4)).prop_map(|(n, a, b0n, extra)| {
        let a = QC::new(a, Rat::zero());
        let b0n = QC::new(b0n, Rat::zero());
        let big_a = q(n as i64) * b0n.clone();
        let b10 = -(Scalar::powi(&a, 2 * n as i64 - 1).unwrap() * big_a.clone() * big_a.clone()) / q(n as i64);
        let mut a0 = Poly2::zero(POLY_TRUNC);
        a0.add_term(0, n - 1, big_a);
        a0.add_term(1, 0, extra[0].clone());
        a0.add_term(0, n, extra[1].clone());
        let mut b1 = Poly2::zero(POLY_TRUNC);
        b1.add_term(1, 0, b10);
        b1.add_term(0, n, b0n);
        b1.add_term(1, 1, extra[2].clone());
        b1.add_term(0, n + 1, extra[3].clone());
        AdaptedForm::new(1, a0, b1).unwrap()
    })
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixing_modes_errors(a in qc(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let e = Coeff::Exact(a);
        let f = Coeff::Float(C64::new(re, im));
        prop_assert_eq!(e.try_add(&f), Err(Error::ModeMismatch));
        prop_assert_eq!(f.try_mul(&e), Err(Error::ModeMismatch));
        prop_assert_eq!(e.try_sub(&f), Err(Error::ModeMismatch));
    }

    #[test]
    fn exact_poly_arithmetic_is_a_ring(a in poly(0, 5, 6, 9), b in poly(0, 5, 6, 7), c in poly(0, 5, 6, 8)) {
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
    }

    #[test]
    fn poly_storage_is_canonical(a in poly(0, 12, 10, 9), b in poly(0, 12, 10, 6)) {
        let p = a.mul(&b);
        prop_assert_eq!(p.trunc(), 6);
        for p in [&a, &b, &p, &a.sub(&a)] {
            for ((i, j), c) in p.terms() {
                prop_assert!(!c.is_zero());
                prop_assert!(i + j <= p.trunc());
            }
        }
        prop_assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn laurent_depth_bounds_the_known_coefficients(
        a in prop::collection::vec((-6i64..=4, qc()), 1..6),
        b in prop::collection::vec((-6i64..=4, qc()), 1..6),
        da in 0i64..=5,
        db in 0i64..=5,
        tail_a in prop::collection::vec((-12i64..=-1, qc()), 0..4),
        tail_b in prop::collection::vec((-12i64..=-1, qc()), 0..4),
    ) {
        let la = Laurent1::from_terms(a.clone(), da);
        let lb = Laurent1::from_terms(b.clone(), db);
        prop_assert_eq!(la.depth(), da);
        // any completion below the recorded depth leaves the known part alone
        let complete = |known: &Laurent1<QC>, tail: &[(i64, QC)], d: i64| {
            let mut t: Vec<(i64, QC)> = known.terms().map(|(e, c)| (e, c.clone())).collect();
            t.extend(tail.iter().filter(|(e, _)| *e < -d).cloned());
            Laurent1::from_terms(t, EXACT)
        };
        let ca = complete(&la, &tail_a, da);
        let cb = complete(&lb, &tail_b, db);
        let p = la.mul(&lb);
        let full = ca.mul(&cb);
        for e in -30..=10 {
            if p.known(e) {
                prop_assert_eq!(p.coeff(e), full.coeff(e), "exponent {}", e);
            }
        }
        let s = la.add(&lb);
        prop_assert_eq!(s.depth(), da.min(db));
    }

    #[test]
    fn ramified_eval_is_termwise(
        terms in prop::collection::vec((0i64..=8, 0u32..=3, -3i64..=3, qc()), 1..8),
        ram in 1u32..=3,
        zr in 0.05f64..0.4,
        zarg in -3.0f64..3.0,
        w in (-0.5f64..0.5, -0.5f64..0.5),
        theta0 in -1.0f64..1.0,
    ) {
        let mut s = RamifiedLogSeries::zero(ram, 1, 1 << 20);
        for (p, k, e, c) in &terms {
            s = s.add(&RamifiedLogSeries::monomial(c.clone(), *p, *k, *e, ram, 1, 1 << 20));
        }
        let br = Branch::new(theta0);
        let z = C64::from_polar(zr, zarg);
        prop_assume!(!br.on_cut(z));
        let w = C64::new(w.0, w.1);
        // independent evaluation: arg z in (theta0 - pi, theta0 + pi]
        let mut arg = zarg;
        while arg > theta0 + std::f64::consts::PI {
            arg -= 2.0 * std::f64::consts::PI;
        }
        while arg <= theta0 - std::f64::consts::PI {
            arg += 2.0 * std::f64::consts::PI;
        }
        let logz = C64::new(zr.ln(), arg);
        let mut la = logz.arg();
        if la <= 0.0 {
            la += 2.0 * std::f64::consts::PI;
        }
        let t = C64::from_polar(logz.norm().powf(1.0 / ram as f64), la / ram as f64);
        let mut want = C64::new(0.0, 0.0);
        for (p, k, e, c) in &terms {
            let zp = C64::from_polar(zr.powf(*p as f64 / ram as f64), arg * *p as f64 / ram as f64);
            want += c.to_c64() * zp * w.powi(*k as i32) * t.powi(*e as i32);
        }
        let got = s.eval(z, w, &br);
        prop_assert!(close(got, want, 1e-10), "{} vs {}", got, want);

        // and evaluation is multiplicative on products
        let sq = s.mul(&s);
        prop_assert!(close(sq.eval(z, w, &br), got * got, 1e-9));
    }

    #[test]
    fn germs_are_tangent_to_the_identity(g in poly(0, 4, 6, 6), h in poly(0, 4, 6, 6)) {
        let f1 = g.add(&Poly2::z(6));
        let f2 = h.add(&Poly2::w(6));
        let tangent = g.coeff(0, 0).is_zero()
            && h.coeff(0, 0).is_zero()
            && g.coeff(1, 0).is_zero()
            && g.coeff(0, 1).is_zero()
            && h.coeff(1, 0).is_zero()
            && h.coeff(0, 1).is_zero();
        match Germ2::new(f1, f2) {
            Ok(_) => prop_assert!(tangent),
            Err(e) => {
                prop_assert!(!tangent);
                prop_assert!(matches!(e, Error::NotTangent(_)));
            }
        }
    }

    #[test]
    fn directions_are_eigenvectors(f in germ(6)) {
        let Ok(ds) = f.characteristic_directions() else { return Ok(()); };
        for d in &ds.directions {
            prop_assert_eq!(d.degenerate, d.lambda.is_zero());
            let (e1, e2) = f.eigen_residual(d).unwrap();
            prop_assert!(e1.is_zero() && e2.is_zero());
            prop_assert!(f.is_characteristic(&d.v).unwrap());
        }
    }

    #[test]
    fn singular_iff_positive_pure_order(g in poly(2, 4, 4, POLY_TRUNC), h in poly(2, 4, 4, POLY_TRUNC)) {
        let f = Germ2::polynomial(g.add(&Poly2::z(POLY_TRUNC)), h.add(&Poly2::w(POLY_TRUNC))).unwrap();
        prop_assume!(!(f.g().is_zero() && f.h().is_zero()));
        let pc = f.pure_order().unwrap();
        prop_assert_eq!(pc.singular, pc.pure_order >= 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chart_projection_conjugates_the_lift(
        g in poly(2, 8, 8, 8),
        h in poly(2, 8, 8, 8),
        c in qc(),
        second in any::<bool>(),
        chain in any::<bool>(),
        pt in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
    ) {
        let f = Germ2::from_parts(g, h).unwrap();
        let step = if second { ChartStep::U2 { c: Coeff::Exact(c) } } else { ChartStep::U1 { c: Coeff::Exact(c) } };
        let mut lifted = blow_up_in(&f, step).unwrap();
        prop_assert!(lifted.fixes_divisor());
        if chain {
            lifted = linear_chain(&lifted, 1).unwrap();
        }
        // small enough that the dropped terms of the lift (whose coefficients
        // grow with the center) stay below rounding
        let x = (C64::new(pt.0, pt.1) * 1e-5, C64::new(pt.2, pt.3) * 1e-5);
        let lhs = push_forward_point(&lifted.chart, lifted.germ.eval(x.0, x.1));
        let base = push_forward_point(&lifted.chart, x);
        let rhs = f.eval(base.0, base.1);
        let size = base.0.norm() + base.1.norm();
        for (l, r, b) in [(lhs.0, rhs.0, base.0), (lhs.1, rhs.1, base.1)] {
            let allowed = 1e-6 * (r - b).norm() + 1e-13 * size;
            prop_assert!((l - r).norm() <= allowed, "{:?} vs {:?}", lhs, rhs);
        }
    }

    #[test]
    fn blow_up_at_any_center_fixes_the_divisor(f in germ(8), c in qc(), inf in any::<bool>()) {
        let center = if inf { Proj::Infinity } else { Proj::Affine(c) };
        let l = blow_up(&f, &center).unwrap();
        prop_assert!(l.fixes_divisor());
    }

    #[test]
    fn adapted_form_reproduces_the_germ(af in adapted(10)) {
        let g = af.germ(12);
        let back = adapted_form_of(&g).unwrap();
        prop_assert_eq!(back.r, af.r);
        let again = back.germ(12);
        prop_assert_eq!(again.f1, g.f1);
        prop_assert_eq!(again.f2, g.f2);
    }

    #[test]
    fn index_is_the_residue_and_classification_is_consistent(af in adapted(16)) {
        let idx = residual_index(&af).unwrap();
        prop_assert_eq!(&idx.index, &idx.k_series.residue());
        prop_assert_eq!(idx.k_series.coeff(-1), idx.index.clone());
        if !idx.index.is_zero() {
            prop_assert!(idx.m.unwrap() < idx.n);
        }
        let cls = classify(&af, &idx);
        let n = idx.n;
        let hard = n >= 2 && idx.m == Some(n - 1) && idx.index == q(n as i64);
        prop_assert_eq!(cls.case == Case::Hard, hard);
        let r = af.r;
        match cls.case {
            Case::Hard => prop_assert_eq!(cls.curve_count, 1),
            Case::EasyA | Case::EasyB => prop_assert_eq!(cls.curve_count, r + cls.m.unwrap() * (r + 1)),
            Case::EasyC | Case::NondegDirect => prop_assert_eq!(cls.curve_count, r),
            _ => prop_assert_eq!(cls.curve_count, 0),
        }
    }

    #[test]
    fn petal_points_have_positive_real_part(
        r in 1u32..=3,
        n in 2u32..=3,
        sigma in 0.05f64..0.95,
        phi in -1.4f64..1.4,
        z in (-0.5f64..0.5, -0.5f64..0.5),
    ) {
        let d = PetalDomain::for_component(r, n, 0.2, 0);
        if let Some(p) = d.invert(sigma, phi) {
            prop_assert!(d.in_domain(p).unwrap());
            let u = d.u(p).unwrap();
            prop_assert!(close(u, C64::from_polar(2.0 * 0.2 * sigma * phi.cos(), phi), 1e-9));
        }
        let z = C64::new(z.0, z.1);
        prop_assume!(z.norm() > 0.0 && !d.branch.on_cut(z));
        if d.in_domain(z).unwrap() {
            prop_assert!(d.u(z).unwrap().re > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn hard_normal_form_and_ladder(af in hard_form()) {
        let idx = residual_index(&af).unwrap();
        prop_assert_eq!(classify(&af, &idx).case, Case::Hard);
        let ng = normalize(&af).unwrap();
        for e in ng.shape() {
            prop_assert_eq!(&e.found, &e.expected, "{}", e.label);
        }
        let ladder = shift_ladder(&ng, OdeForm::Linearized, 12).unwrap();
        prop_assert_eq!(ladder.levels.len() as u32, 2 * ng.n - 2);
        for lv in &ladder.levels {
            let (a, b) = ladder.form.coefficients(lv.h, ng.n);
            prop_assert!(ode_residual(a, b, ng.n, &lv.q, &lv.rhs).is_zero());
        }
        prop_assert!(!ng.alpha.is_zero() && !ng.a.is_zero());
    }
}
