//! Invariants, blow-ups and parabolic curves for polynomial germs of
//! holomorphic maps of `C^2` tangent to the identity.

pub mod blowup;
pub mod classify;
pub mod error;
pub mod fixtures;
pub mod germ;
pub mod hard;
pub mod index;
pub mod petal;
pub mod series;

pub use blowup::{blow_up, linear_chain, push_forward_point, Chart, ChartStep, LiftedGerm};
pub use classify::{certify_chain, classify, easy_case_target, Case, Classification};
pub use error::{Error, Result};
pub use germ::{Direction, DirectionSet, Germ2, PointClass, Proj};
pub use hard::{
    default_ladder, normalize, normalize_with, shift_ladder, shifted_germ, HardMap, Ladder, NormalizedGerm, OdeForm,
    ShiftedGerm,
};
pub use index::{adapted_form, residual_index, AdaptedForm, IndexData};
pub use series::*;
