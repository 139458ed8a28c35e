//! Wald tests of single linear restrictions on the shock block and the
//! significance tables built from them.

mod table;
mod wald;

pub use table::{
    band_colour, outcome_label, shock_label, SignificanceTable, TableCell, TestFamily, TABLE_HEADER,
};
pub use wald::{
    build_restriction, significance_band, wald_test, Band, Restriction, RestrictionKind, WaldResult,
    MIN_RESTRICTED_VARIANCE,
};
