//! Discrete-time mesoscopic dynamics: cell-transmission freeway with a capacity
//! drop at lane closures, ramp queues, signalised arterial approaches, demand
//! sampling and probe vehicles.

mod arterial;
mod capacity;
mod demand;
mod isolated;
mod probe;
mod sim;
mod trace;

pub use arterial::{movement_lanes, ApproachQueueState, IntersectionState};
pub use capacity::{bottleneck_capacity, metering_rate, nearest_metering_setting, METERING_RATES_VEH_H, RED_DURATIONS_S};
pub use demand::DemandSampler;
pub use isolated::{IsolatedMetrics, IsolatedScene};
pub use probe::{
    advance_probe, emission_g_per_h, emission_g_per_km, CellSpan, ProbeOrigin, ProbeVehicle, SectionCrossing,
    FUEL_PER_EMISSION, MOVING_ABOVE_KMH, STOP_BELOW_KMH,
};
pub use sim::{
    ControlVector, Counters, IncidentWindow, RampQueueState, SectionState, SimParams, SimState, Simulator, TraceRow,
    VehicleLedger,
};
pub use trace::write_trace_csv;
