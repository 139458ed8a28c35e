//! Shock transforms and impulse responses built from local-projection fits.

mod curve;
mod plugin;
mod transform;

pub use curve::{read_irf_csv, write_irf_csv, Flavor, IrfCurve, SpecLabel, IRF_HEADER};
pub use plugin::{
    ar1_check, conditional_irfs, estimate_a, estimate_a_values, scaled_irf_family, threshold_from_quantile,
    unconditional_irf, Ar1Check, AverageOver, PlugInEstimate, ScaledFormula, DEFAULT_COVERAGE, DEFAULT_SCALES,
    MIN_AR1_LEN,
};
pub use transform::ShockTransform;
