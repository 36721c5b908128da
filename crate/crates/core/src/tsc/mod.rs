//! Traffic-responsive arterial signal control: cycle models, calibration,
//! corridor demand estimation, flow ratios and green splits.

mod calibrate;
mod cycle;
mod demand;
mod plan;

pub use calibrate::{
    calibrate_cycle_model, fit_line, performance_index, read_samples_csv, write_samples_csv, CalibrationFit,
    CalibrationSample, EMISSION_WEIGHT, FUEL_WEIGHT, TRAVEL_TIME_WEIGHT,
};
pub(crate) use calibrate::csv_err;
pub use cycle::{default_cycle_space, webster_cycle, CycleModel};
pub use demand::{estimate_demands, estimate_turn_ratios, CorridorInputs, DemandEstimate};
pub use plan::{dominant_phase, flow_ratios, green_splits, phase_serves, FlowRatios, SignalController, SignalPlan, PHASES};
