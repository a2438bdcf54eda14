//! Free-boundary analysis: positivity sets, boundary curves, flatness,
//! normalization, blow-up traces and growth exponents.

mod blowup;
mod boundary;
mod direction;
mod holder;
mod membership;

pub use blowup::{blowup_sequence, normal_field_and_modulus, BlowupParams, BlowupSource, BlowupTrace, NormalModulus};
pub use boundary::{
    extract_free_boundary, positivity_set, FreeBoundary, GraphRepresentation, PositivityMask, ThresholdRule,
};
pub use direction::{
    flatness, normalize, normalized_direction, DirectionEstimate, DirectionObjective, NormalizationReport,
};
pub use holder::{holder_exponent, HolderFit, HolderSource};
pub use membership::{class_membership, FlatnessReport, MembershipParams};
