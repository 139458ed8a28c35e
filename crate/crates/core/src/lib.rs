//! Linear and non-linear local projections of panel outcomes on identified
//! monetary-policy shocks.

pub mod dgp;
pub mod error;
pub mod factor;
pub mod inference;
pub mod irf;
pub mod lp;
pub mod panel;
pub mod rng;
pub mod stats;
pub mod svg;
pub mod symmetry;

pub use error::{Error, ErrorClass, Result};
