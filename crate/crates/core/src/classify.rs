//! Case analysis of a singular point on the divisor from `(r, m, n, Ind)`,
//! and the symbolic certificate of the easy cases through the linear chain.

use std::fmt;

use crate::blowup::{linear_chain, LiftedGerm};
use crate::error::{Error, Result};
use crate::germ::{Germ2, Proj};
use crate::index::{AdaptedForm, IndexData};
use crate::series::roots::{exact_nth_root, nth_roots};
use crate::series::{Coeff, Mode, Poly2, Scalar, C64};

/// Tolerance for deciding that a float quantity vanishes.
pub const FLOAT_ZERO: f64 = 1e-10;

fn vanishes<S: Scalar>(x: &S) -> bool {
    x.negligible(FLOAT_ZERO)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    IndexZero,
    /// `m < n - 1`
    EasyA,
    /// `m = n - 1`, `Ind != n`
    EasyB,
    /// `m = 0`, `n = 1`, `Ind = 1`
    EasyC,
    /// `n = 1`, `Ind` not in `{0, 1}`
    NondegDirect,
    /// `m = n - 1`, `Ind = n`, `n >= 2`
    Hard,
    NotTangential,
    NotSingular,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug)]
pub struct Classification<S> {
    pub case: Case,
    pub r: u32,
    pub m: Option<u32>,
    pub n: u32,
    pub index: Option<S>,
    /// Lower bound on the number of parabolic curves at the point.
    pub curve_count: u32,
    /// Nondegenerate direction reached by the argument, in the chart after
    /// `chain_steps` blow-ups of the linear chain.
    pub target: Option<Proj<S>>,
    pub chain_steps: u32,
    pub lambda: Option<S>,
    pub z0: Option<S>,
}

impl<S: Scalar> Classification<S> {
    fn bare(case: Case, af: &AdaptedForm<S>, idx: Option<&IndexData<S>>) -> Self {
        Classification {
            case,
            r: af.r,
            m: idx.and_then(|i| i.m),
            n: idx.map(|i| i.n).unwrap_or(0),
            index: idx.map(|i| i.index.clone()),
            curve_count: 0,
            target: None,
            chain_steps: 0,
            lambda: None,
            z0: None,
        }
    }

    /// Whether the point is covered by a theorem needing only a
    /// nondegenerate direction of the original germ.
    pub fn covered_by_nondegenerate_direction(&self) -> bool {
        matches!(self.case, Case::NondegDirect) || (self.case == Case::EasyA && self.m == Some(0))
    }
}

/// Non-tangential lifts never reach [`classify`]; this builds their label.
pub fn not_tangential<S: Scalar>(r: u32) -> Classification<S> {
    Classification {
        case: Case::NotTangential,
        r,
        m: None,
        n: 0,
        index: None,
        curve_count: 0,
        target: None,
        chain_steps: 0,
        lambda: None,
        z0: None,
    }
}

/// The decision tree: not singular, index zero, `n = 1`, `m < n - 1`,
/// `m = n - 1`.
pub fn classify<S: Scalar>(af: &AdaptedForm<S>, idx: &IndexData<S>) -> Classification<S> {
    let r = af.r;
    if !idx.tangential {
        return not_tangential(r);
    }
    if idx.n == 0 {
        return Classification::bare(Case::NotSingular, af, Some(idx));
    }
    if vanishes(&idx.index) || idx.m.is_none() {
        return Classification::bare(Case::IndexZero, af, Some(idx));
    }
    let m = idx.m.unwrap();
    let n = idx.n;
    let mut c = Classification::bare(Case::IndexZero, af, Some(idx));
    if m >= n {
        return c;
    }
    if n == 1 {
        let (a00, b01, b10) = (af.a(0, 0), af.b(0, 1), af.b(1, 0));
        if vanishes(&(idx.index.clone() - S::one())) {
            c.case = Case::EasyC;
            c.curve_count = r;
            c.lambda = Some(a00);
        } else {
            c.case = Case::NondegDirect;
            c.curve_count = r;
            let den = a00.clone() - b01;
            c.target = Some(Proj::Affine(b10.div(&den).expect("Ind != 1")));
            c.lambda = Some(a00);
        }
        return c;
    }
    c.curve_count = r + m * (r + 1);
    c.chain_steps = m;
    if m + 1 < n {
        c.case = Case::EasyA;
    } else if vanishes(&(idx.index.clone() - S::from_i64(n as i64))) {
        c.case = Case::Hard;
        c.curve_count = 1;
        c.chain_steps = 0;
        c.z0 = Some(S::zero());
        return c;
    } else {
        c.case = Case::EasyB;
    }
    if m == 0 {
        let a00 = af.a(0, 0);
        c.target = Some(Proj::Affine(af.b(1, 0).div(&a00).expect("a00 != 0")));
        c.lambda = Some(a00);
    } else if let Ok((z0, lambda)) = easy_case_target(af, idx) {
        c.target = Proj::from_coords(&z0, &S::one());
        c.z0 = Some(z0);
        c.lambda = Some(lambda);
    }
    c
}

/// `z0 = [a_{0,m} - (m+1) b_{0,m+1}] / ((m+1) b_{1,0})` and the eigenvalue of
/// `[z0 : 1]` after `m` chain steps.
pub fn easy_case_target<S: Scalar>(af: &AdaptedForm<S>, idx: &IndexData<S>) -> Result<(S, S)> {
    let m = idx
        .m
        .ok_or_else(|| Error::Hypothesis("A0(0, w) vanishes identically".into()))?;
    let n = idx.n;
    if m == 0 || m + 1 > n {
        return Err(Error::Hypothesis(format!(
            "easy case target needs 1 <= m <= n - 1, got m = {m}, n = {n}"
        )));
    }
    let b10 = af.b(1, 0);
    if vanishes(&b10) {
        return Err(Error::Hypothesis("b_{1,0} = 0 contradicts pure order one".into()));
    }
    let mp1 = S::from_i64(m as i64 + 1);
    let num = af.a(0, m) - mp1.clone() * af.b(0, m + 1);
    let z0 = num.div(&(mp1 * b10.clone())).expect("nonzero");
    if vanishes(&z0) {
        return Err(Error::Hypothesis("z0 = 0: m = n - 1 and Ind = n (hard case)".into()));
    }
    let r = af.r as i64;
    let lambda = if m + 1 < n {
        b10 * Scalar::powi(&z0, r + 1).expect("power")
    } else {
        af.a(0, n - 1).div(&S::from_i64(n as i64)).expect("n > 0") * Scalar::powi(&z0, r).expect("power")
    };
    Ok((z0, lambda))
}

/// `lambda = b10 z0^(r+1) + b_{0,m+1} z0^r`, the form both cases reduce to.
pub fn unified_lambda<S: Scalar>(af: &AdaptedForm<S>, m: u32, z0: &S) -> S {
    let r = af.r as i64;
    af.b(1, 0) * Scalar::powi(z0, r + 1).expect("power") + af.b(0, m + 1) * Scalar::powi(z0, r).expect("power")
}

#[derive(Clone, Debug)]
pub struct CertifiedChainReport<S> {
    pub steps: u32,
    pub direction: Proj<S>,
    pub lambda_predicted: S,
    pub lambda_found: S,
    pub nondegenerate: bool,
    /// `nu(f^[m])`
    pub order: u32,
    pub curve_count: u32,
}

/// Truncation degree an adapted germ needs for the chain certificate.
pub fn chain_trunc_needed(r: u32, m: u32) -> u32 {
    (m + 1) * (r + 1) + m + 1
}

/// Runs the chain, then checks `[z0 : 1]` is a nondegenerate characteristic
/// direction of `f^[m]` with the predicted eigenvalue and that
/// `nu(f^[m]) - 1 = r + m (r + 1)`.
pub fn certify_chain<S: Scalar>(f: &LiftedGerm<S>, cls: &Classification<S>) -> Result<CertifiedChainReport<S>> {
    let r = cls.r;
    let n = cls.n;
    let m = match (cls.case, cls.m) {
        (Case::EasyA | Case::EasyB, Some(m)) => m,
        (Case::Hard, _) => return hard_chain_stop(f, r, n),
        _ => {
            return Err(Error::Hypothesis(format!(
                "chain certificate applies to the easy cases, not {}",
                cls.case
            )))
        }
    };
    let need = chain_trunc_needed(r, m);
    let have = f.germ.trunc();
    if have < need {
        return Err(Error::TruncationExhausted {
            op: "certify_chain",
            need: need as i64,
            have: have as i64,
        });
    }
    let f = LiftedGerm {
        germ: f.germ.with_trunc(need),
        ..f.clone()
    };
    let fm = linear_chain(&f, m as usize)?;
    let g = fm.germ;
    let order = g.order()?;
    let target = cls
        .target
        .clone()
        .ok_or_else(|| Error::Hypothesis("no target direction".into()))?;
    let lambda_predicted = cls.lambda.clone().expect("easy cases carry lambda");
    let dirs = g.characteristic_directions()?;
    let found = match S::MODE {
        Mode::Exact => dirs.find(&target).cloned(),
        Mode::Float => dirs
            .directions
            .iter()
            .find(|d| proj_close(&d.v, &target, 1e-6))
            .cloned(),
    }
    .ok_or_else(|| Error::Hypothesis(format!("{target} is not a characteristic direction of the chain end")))?;
    // The predicted eigenvalue refers to the representative (z0, 1).
    let (v1, v2) = match &cls.z0 {
        Some(z0) => (z0.clone(), S::one()),
        None => target.coords(),
    };
    let (p1, p2) = g.leading_parts()?;
    let e1 = p1.eval_exact(&v1, &v2) - lambda_predicted.clone() * v1.clone();
    let e2 = p2.eval_exact(&v1, &v2) - lambda_predicted.clone() * v2.clone();
    if !(vanishes(&e1) && vanishes(&e2)) {
        return Err(Error::Hypothesis(format!(
            "eigenvalue at {target} differs from the prediction"
        )));
    }
    let (n1, _) = target.coords();
    let scale = v1.div(&n1).unwrap_or_else(S::one);
    let lambda_found = found.lambda.clone() * Scalar::powi(&scale, order as i64 - 1).expect("power");
    Ok(CertifiedChainReport {
        steps: m,
        direction: target,
        lambda_predicted,
        nondegenerate: !found.degenerate,
        lambda_found,
        order,
        curve_count: order - 1,
    })
}

fn proj_close<S: Scalar>(a: &Proj<S>, b: &Proj<S>, tol: f64) -> bool {
    match (a, b) {
        (Proj::Infinity, Proj::Infinity) => true,
        (Proj::Affine(x), Proj::Affine(y)) => (x.to_c64() - y.to_c64()).norm() <= tol * (1.0 + y.magnitude()),
        _ => false,
    }
}

/// In the hard case the chain's `(m+1)`-th center `[0:1]` is a degenerate
/// characteristic direction after `n - 1` steps.
fn hard_chain_stop<S: Scalar>(f: &LiftedGerm<S>, r: u32, n: u32) -> Result<CertifiedChainReport<S>> {
    let m = n - 1;
    let need = chain_trunc_needed(r, m);
    if f.germ.trunc() < need {
        return Err(Error::TruncationExhausted {
            op: "certify_chain",
            need: need as i64,
            have: f.germ.trunc() as i64,
        });
    }
    let f = LiftedGerm {
        germ: f.germ.with_trunc(need),
        ..f.clone()
    };
    let fm = linear_chain(&f, m as usize)?;
    let dirs = fm.germ.characteristic_directions()?;
    match dirs.find(&Proj::Infinity) {
        Some(d) if d.degenerate => Err(Error::ChainTerminated {
            step: n as usize,
            reason: "chain reaches degenerate point (z0 = 0)".into(),
        }),
        _ => Err(Error::Hypothesis(
            "hard case expected a degenerate direction [0:1] at the chain end".into(),
        )),
    }
}

/// The rescaling `Z = alpha z` of the `m = 0, n = 1, Ind = 1` case with
/// `alpha^r = -a00`, after which `f1 = Z - Z^(r+1) + ...`.
#[derive(Clone, Debug)]
pub struct EasyCCertificate {
    pub alpha: Coeff,
    /// Coefficient of `Z^(r+1)` in the rescaled first component.
    pub leading: Coeff,
}

pub fn certify_easy_c<S: Scalar>(af: &AdaptedForm<S>) -> Result<EasyCCertificate> {
    let r = af.r;
    let target = -af.a(0, 0);
    if vanishes(&target) {
        return Err(Error::Hypothesis("a00 = 0".into()));
    }
    let exact = target.to_qc().and_then(|t| exact_nth_root(&t, r));
    let alpha = match exact {
        Some(a) => Coeff::Exact(a),
        None => Coeff::Float(nth_roots(target.to_c64(), r)[0]),
    };
    // f1(Z / alpha, w) alpha = Z + a00 alpha^-r Z^(r+1) + ...
    let lead = match &alpha {
        Coeff::Exact(a) => {
            let a = Scalar::powi(a, -(r as i64)).expect("nonzero");
            Coeff::Exact(af.a(0, 0).to_qc().expect("exact") * a)
        }
        Coeff::Float(a) => Coeff::Float(af.a(0, 0).to_c64() * a.powi(-(r as i32))),
    };
    Ok(EasyCCertificate { alpha, leading: lead })
}

/// Scaling `(z, w) -> (alpha z, beta w)` of an adapted form.
pub fn rescale<S: Scalar>(af: &AdaptedForm<S>, alpha: &S, beta: &S) -> AdaptedForm<S> {
    // f(x, y) with z = x / alpha, w = y / beta, then (alpha f1, beta f2):
    // a'_{ij} = a_{ij} alpha^{-r-i} beta^{-j}, b'_{ij} = b_{ij} beta alpha^{-r-i} beta^{-j}
    let r = af.r as i64;
    let ai = alpha.inv().expect("alpha != 0");
    let bi = beta.inv().expect("beta != 0");
    let sc = |p: &Poly2<S>, extra: S| {
        Poly2::from_terms(
            p.terms().map(|((i, j), c)| {
                let f = Scalar::powi(&ai, r + *i as i64).unwrap() * Scalar::powi(&bi, *j as i64).unwrap();
                ((*i, *j), c.clone() * f * extra.clone())
            }),
            p.trunc(),
        )
    };
    AdaptedForm {
        r: af.r,
        a0: sc(&af.a0, S::one()),
        b1: sc(&af.b1, beta.clone()),
    }
}

/// Numeric value of a coefficient for reports.
pub fn as_c64<S: Scalar>(x: &S) -> C64 {
    x.to_c64()
}

/// Convenience: classify a germ given in an adapted chart.
pub fn classify_adapted<S: Scalar>(g: &Germ2<S>) -> Result<(AdaptedForm<S>, IndexData<S>, Classification<S>)> {
    let af = crate::index::adapted_form_of(g)?;
    let idx = crate::index::residual_index(&af)?;
    let cls = classify(&af, &idx);
    Ok((af, idx, cls))
}
