//! Truncated series arithmetic.

pub mod gcd;
pub mod laurent;
pub mod poly2;
pub mod ramified;
pub mod roots;
pub mod scalar;
pub mod upoly;

pub use gcd::{poly_div, poly_gcd, square_free, POLY_TRUNC};
pub use laurent::{Laurent1, DEFAULT_DEPTH, EXACT};
pub use poly2::Poly2;
pub use ramified::{log_root, Branch, RamifiedLogSeries};
pub use scalar::{fmt_c64, fmt_qc, rationalize, Coeff, Mode, Rat, Scalar, C64, QC};
pub use upoly::UPoly;
