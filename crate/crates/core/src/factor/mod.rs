//! Static factor model of high-frequency surprises and its set
//! identification by sign-restricted random rotations.

mod em;
mod identify;
mod rotation;
mod surprises;

pub use em::{estimate_factor_mle, EmOptions, FactorModel, HEYWOOD_FLOOR};
pub use identify::{
    draw_candidates, entrywise_median, identify_factors, identify_with_candidates, Identification,
    IdentificationReport, IdentifyOptions, LOW_ACCEPTANCE, MIN_DRAWS,
};
pub use rotation::{
    check_sign_restrictions, sample_orthonormal, RotationCandidate, SignRestriction,
    SignRestrictionMatrix,
};
pub use surprises::{SurprisePanel, INSTRUMENTS};
