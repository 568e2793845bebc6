//! Polynomial roots: simultaneous Aberth iteration in double precision, and
//! exact recovery of complex-rational roots by rounding plus verification.

use num_traits::Zero;

use super::scalar::{rationalize, Scalar, C64, QC};
use super::upoly::UPoly;

/// All complex roots of `p` (with multiplicity), by Aberth-Ehrlich iteration.
pub fn complex_roots(p: &UPoly<C64>) -> Vec<C64> {
    let deg = match p.degree() {
        Some(d) if d > 0 => d,
        _ => return Vec::new(),
    };
    let lead = p.lead();
    let a: Vec<C64> = p.coeffs().iter().map(|c| c / lead).collect();
    let dp = UPoly::new(a.clone()).derivative();
    let poly = UPoly::new(a.clone());

    // Initial guesses on a circle of the Cauchy bound radius.
    let radius = 1.0 + a[..deg].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let r0 = radius.min(1e6) * 0.5;
    let mut z: Vec<C64> = (0..deg)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / deg as f64 + 0.4;
            C64::from_polar(r0, th)
        })
        .collect();

    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let pv = poly.eval_c64(z[i]);
            if pv.norm() == 0.0 {
                continue;
            }
            let ratio = pv / dp.eval_c64(z[i]);
            let mut s = C64::new(0.0, 0.0);
            for j in 0..deg {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > 0.0 {
                        s += C64::new(1.0, 0.0) / d;
                    }
                }
            }
            let step = ratio / (C64::new(1.0, 0.0) - ratio * s);
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-16 {
            break;
        }
    }
    // Newton polish on the original polynomial.
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let d = dp.eval_c64(*zi);
            if d.norm() == 0.0 {
                break;
            }
            let step = poly.eval_c64(*zi) / d;
            if step.is_finite() {
                *zi -= step;
            }
        }
    }
    z
}

/// Result of exact root extraction.
#[derive(Clone, Debug)]
pub struct ExactRoots {
    /// Complex-rational roots with multiplicities.
    pub rational: Vec<(QC, usize)>,
    /// Cofactor without complex-rational roots (monic); degree 0 when all
    /// roots were found.
    pub residual: UPoly<QC>,
    /// Numeric roots of the residual factor.
    pub residual_numeric: Vec<C64>,
}

/// Finds the complex-rational roots of an exact polynomial.  Candidates come
/// from numeric roots of the square-free part, rounded by continued fractions
/// and confirmed by exact evaluation.
pub fn exact_roots(p: &UPoly<QC>) -> ExactRoots {
    let mut rest = p.monic();
    let mut rational: Vec<(QC, usize)> = Vec::new();
    if rest.degree().unwrap_or(0) > 0 {
        let sf = rest.square_free();
        for guess in complex_roots(&sf.to_float()) {
            let cand = [10i64, 100, 1000, 10_000, 100_000, 1_000_000]
                .iter()
                .filter_map(|d| rationalize(guess, *d))
                .find(|q| sf.eval(q).is_zero());
            let Some(q) = cand else { continue };
            if rational.iter().any(|(r, _)| *r == q) {
                continue;
            }
            let lin = UPoly::linear(q.clone());
            let mut mult = 0;
            while let Some(next) = rest.div_exact(&lin) {
                rest = next;
                mult += 1;
            }
            rational.push((q, mult));
        }
    }
    rational.sort_by(|a, b| cmp_qc(&a.0, &b.0));
    let residual_numeric = complex_roots(&rest.to_float());
    ExactRoots {
        rational,
        residual: rest,
        residual_numeric,
    }
}

fn cmp_qc(a: &QC, b: &QC) -> std::cmp::Ordering {
    a.re.cmp(&b.re).then(a.im.cmp(&b.im))
}

/// Real part ordering helper for float roots.
pub fn sort_roots(v: &mut [C64]) {
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// The `n` complex `n`-th roots of `c`, principal one first.
pub fn nth_roots(c: C64, n: u32) -> Vec<C64> {
    let r = c.norm().powf(1.0 / n as f64);
    let th = c.arg();
    (0..n)
        .map(|k| C64::from_polar(r, (th + 2.0 * std::f64::consts::PI * k as f64) / n as f64))
        .collect()
}

/// Exact `n`-th root of a complex rational when it is itself a complex
/// rational.
pub fn exact_nth_root(c: &QC, n: u32) -> Option<QC> {
    let mut poly = vec![QC::from_i64(0); n as usize + 1];
    poly[0] = -c.clone();
    poly[n as usize] = QC::from_i64(1);
    let roots = exact_roots(&UPoly::new(poly));
    roots.rational.into_iter().map(|(q, _)| q).next()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp(c: &[(i64, i64)]) -> UPoly<QC> {
        UPoly::new(
            c.iter()
                .map(|(re, im)| QC::new(QC::from_i64(*re).re, QC::from_i64(*im).re))
                .collect(),
        )
    }

    #[test]
    fn aberth_finds_roots_of_unity() {
        let p = UPoly::new(vec![
            C64::new(-1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ]);
        let r = complex_roots(&p);
        assert_eq!(r.len(), 3);
        for z in r {
            assert!((z.powi(3) - C64::new(1.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn exact_roots_with_multiplicity_and_residual() {
        // (x - 1/2)^2 (x - i) (x^2 - 2)
        let a = UPoly::linear(QC::from_ratio(1, 2));
        let b = UPoly::linear(QC::imag_unit());
        let c = qp(&[(-2, 0), (0, 0), (1, 0)]);
        let p = a.mul(&a).mul(&b).mul(&c);
        let r = exact_roots(&p);
        assert_eq!(r.rational.len(), 2);
        assert!(r.rational.contains(&(QC::from_ratio(1, 2), 2)));
        assert!(r.rational.contains(&(QC::imag_unit(), 1)));
        assert_eq!(r.residual.degree(), Some(2));
        assert_eq!(r.residual_numeric.len(), 2);
    }

    #[test]
    fn exact_cube_root() {
        assert_eq!(exact_nth_root(&QC::from_ratio(-8, 27), 3), Some(QC::from_ratio(-2, 3)));
        assert_eq!(exact_nth_root(&QC::from_i64(2), 2), None);
    }
}
