//! Comparison strategies: no control, a decentralised feedback controller and
//! three independently learning single-actuator agents.

mod feedback;
mod uncoordinated;

pub use feedback::{
    feedback_step, no_control, occupancy, FeedbackControls, FeedbackGains, FeedbackMeasurement, SectionControls,
    MAX_METERING_RATE_VEH_H, MIN_METERING_RATE_VEH_H,
};
pub use uncoordinated::{build_uncoordinated_agents, StateComponent, SubAgentKind, SubAgentSpec, SubAgents};
