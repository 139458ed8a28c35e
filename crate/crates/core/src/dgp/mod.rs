//! Block-recursive structural model: validation, simulation and
//! Monte-Carlo ground-truth impulse responses.

mod model;
mod oracle;
mod simulate;

pub use model::{validate_model, ShockLaw, StructuralModel, N_X};
pub use oracle::{abs_shift_moment, analytic_linear_irf, true_irf_oracle, write_oracle_csv, OracleIrf, OracleOptions};
pub use simulate::{country_label, simulate, simulate_with_burn_in, SimulatedPanel, BURN_IN};
