//! Small germs used by tests, benches and the CLI self-checks.

use crate::index::AdaptedForm;
use crate::series::{Poly2, Scalar, POLY_TRUNC, QC};

fn poly(t: &[((u32, u32), i64)]) -> Poly2<QC> {
    Poly2::from_terms(t.iter().map(|(e, c)| (*e, QC::from_i64(*c))), POLY_TRUNC)
}

/// `f1 = z + 2 z^2 w`, `f2 = w + b10 z^2 + z w^2`: hard case with `r = 1`, `n = 2`.
pub fn hard_witness(b10: i64) -> AdaptedForm<QC> {
    AdaptedForm::new(1, poly(&[((0, 1), 2)]), poly(&[((1, 0), b10), ((0, 2), 1)])).unwrap()
}

/// `f1 = z + 3 z^2 w^2`, `f2 = w - 3 z^2 + z w^3`: hard case with `n = 3`.
pub fn hard_witness_three() -> AdaptedForm<QC> {
    AdaptedForm::new(1, poly(&[((0, 2), 3)]), poly(&[((1, 0), -3), ((0, 3), 1)])).unwrap()
}

/// Hard case `n = 2` with extra terms, so that no defect coefficient
/// vanishes by symmetry.
pub fn generic_hard_two() -> AdaptedForm<QC> {
    AdaptedForm::new(
        1,
        poly(&[((0, 1), 2), ((1, 0), 1), ((0, 2), 1)]),
        poly(&[((1, 0), -2), ((0, 2), 1), ((1, 1), 1), ((2, 0), 1), ((0, 3), 1)]),
    )
    .unwrap()
}

/// Hard case `n = 3` with extra terms.
pub fn generic_hard_three() -> AdaptedForm<QC> {
    AdaptedForm::new(
        1,
        poly(&[((0, 2), 3), ((1, 0), 1), ((0, 3), 1)]),
        poly(&[((1, 0), -3), ((0, 3), 1), ((1, 1), 1), ((2, 0), 1), ((0, 4), 1)]),
    )
    .unwrap()
}
