//! Monthly panel of country outcomes, euro-area controls and the identified
//! shock calendar.

mod calendar;
mod dataset;
mod shocks;
mod transform;

pub use calendar::{CalendarMonth, MonthWindow};
pub use dataset::{EuroControl, Outcome, PanelDataset, PanelRow, Series, VariableName, EURO_AREA_LABEL};
pub use shocks::{
    assign_shocks_to_months, read_reassignment_map, read_shock_events, ReassignmentMap,
    ShockEvent, ShockKind, ShockSeries, ShockSet,
};
pub use transform::{deseasonalize_monthly, to_log_points};
