//! The coordinated freeway control agent: state discretisation, action space,
//! reward, desired density, upstream speed-limit zone and lane-change zones.

mod action;
mod lc;
mod reward;
mod state;
mod upstream;

pub use action::{
    enumerate_actions, speed_candidates, FtcAction, MAX_SPEED_KMH, MIN_SPEED_KMH, SPEED_LIMITS_KMH, SPEED_STEP_KMH,
};
pub use lc::{lc_zone, lc_zone_active, merge_point_km, LcTarget, LcZone, LC_ZONE_KM};
pub use reward::{compute_reward, desired_density, fallback_travel_time_min, RewardParams};
pub use state::{density_bin, discretize_state, flow_bin, queue_bin, snap, FtcRawState};
pub use upstream::{upstream_vsl_command, upstream_vsl_location, UpstreamMode, ZONE_SAFETY_FACTOR};
