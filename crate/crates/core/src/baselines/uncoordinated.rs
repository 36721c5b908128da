use serde::{Deserialize, Serialize};

use crate::ftc::{density_bin, flow_bin, queue_bin, speed_candidates, FtcRawState, MAX_SPEED_KMH};
use crate::mesosim::RED_DURATIONS_S;
use crate::qcore::{ActionKey, QTable, StateKey};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubAgentKind {
    Vsl,
    Rm,
    Lc,
}

/// Observation components a sub-agent may use. Arterial variables are excluded
/// by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateComponent {
    Density,
    NetInflow,
    OnrampQueue,
    ClosedLanes,
}

/// One single-actuator agent with its own Q-table.
#[derive(Clone, Debug, PartialEq)]
pub struct SubAgentSpec {
    pub kind: SubAgentKind,
    pub state_components: Vec<StateComponent>,
    pub table: QTable,
}

impl SubAgentSpec {
    pub fn new(kind: SubAgentKind, discount: f64) -> Result<Self> {
        use StateComponent::*;
        let state_components = match kind {
            SubAgentKind::Vsl => vec![Density, NetInflow, ClosedLanes],
            SubAgentKind::Rm => vec![Density, OnrampQueue],
            SubAgentKind::Lc => vec![Density, ClosedLanes],
        };
        Ok(Self { kind, state_components, table: QTable::new(discount)? })
    }

    pub fn state_key(&self, raw: &FtcRawState) -> StateKey {
        StateKey(
            self.state_components
                .iter()
                .map(|c| match c {
                    StateComponent::Density => density_bin(raw.density_veh_km),
                    StateComponent::NetInflow => flow_bin(raw.net_inflow_veh_h),
                    StateComponent::OnrampQueue => queue_bin(raw.onramp_queue_m),
                    StateComponent::ClosedLanes => i32::from(raw.closed_lanes),
                })
                .collect(),
        )
    }

    /// Actions of this agent's actuator. Keys sort the neutral setting first.
    pub fn candidates(&self, previous_speed_kmh: f64) -> Vec<ActionKey> {
        match self.kind {
            SubAgentKind::Vsl => speed_candidates(previous_speed_kmh)
                .into_iter()
                .map(|v| ActionKey(vec![(MAX_SPEED_KMH - v).round() as i32]))
                .collect(),
            SubAgentKind::Rm => (0..RED_DURATIONS_S.len() as i32).map(|i| ActionKey(vec![i])).collect(),
            SubAgentKind::Lc => vec![ActionKey(vec![0]), ActionKey(vec![1])],
        }
    }
}

/// The three sub-agents of the uncoordinated baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct SubAgents {
    pub vsl: SubAgentSpec,
    pub rm: SubAgentSpec,
    pub lc: SubAgentSpec,
}

impl SubAgents {
    pub fn iter(&self) -> impl Iterator<Item = &SubAgentSpec> {
        [&self.vsl, &self.rm, &self.lc].into_iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut SubAgentSpec> {
        [&mut self.vsl, &mut self.rm, &mut self.lc].into_iter()
    }
}

pub fn build_uncoordinated_agents(discount: f64) -> Result<SubAgents> {
    Ok(SubAgents {
        vsl: SubAgentSpec::new(SubAgentKind::Vsl, discount)?,
        rm: SubAgentSpec::new(SubAgentKind::Rm, discount)?,
        lc: SubAgentSpec::new(SubAgentKind::Lc, discount)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_counts() {
        let a = build_uncoordinated_agents(0.9).unwrap();
        assert_eq!(a.vsl.candidates(80.0).len(), 3);
        assert_eq!(a.rm.candidates(80.0).len(), 8);
        assert_eq!(a.lc.candidates(80.0).len(), 2);
    }

    #[test]
    fn no_arterial_components() {
        let a = build_uncoordinated_agents(0.9).unwrap();
        let raw = FtcRawState {
            density_veh_km: 90.0,
            net_inflow_veh_h: 300.0,
            onramp_queue_m: 100.0,
            closed_lanes: 1,
            dominant_phase: 5,
            demand_east_veh_h: 2000.0,
            demand_south_veh_h: 2100.0,
            demand_west_veh_h: 2200.0,
            demand_north_veh_h: 2300.0,
        };
        assert_eq!(a.vsl.state_key(&raw).0, vec![90, 300, 1]);
        assert_eq!(a.rm.state_key(&raw).0, vec![90, 100]);
        assert_eq!(a.lc.state_key(&raw).0, vec![90, 1]);
        for agent in a.iter() {
            assert!(agent.state_key(&raw).0.len() <= 3);
            assert!(agent.state_key(&raw).0.iter().all(|v| *v < 2000));
        }
    }
}
