//! Road network, fundamental diagram, demand profiles and scenario documents.

mod demand;
mod fd;
mod scenario;
mod topology;

pub use demand::{DemandProfile, EntranceDemand, EntranceLocation};
pub use fd::FundamentalDiagram;
pub use scenario::{
    load_scenario, nominal_flows, save_scenario, AgentConfig, DemandConfig, DemandLevel, DemandSource, FreewayConfig,
    IncidentConfig, NetworkPreset, NominalFlows, ScenarioConfig, SignalConfig,
};
pub use topology::{
    validate_topology, Direction, FreewaySection, Intersection, IssueKind, Movement, NetworkTopology, RampKind,
    RampSpec, TurnRatios, ValidationIssue, ValidationReport,
};
