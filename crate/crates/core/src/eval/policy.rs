use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    feedback_step, no_control, FeedbackControls, FeedbackGains, FeedbackMeasurement, SectionControls, SubAgentKind,
    SubAgentSpec, SubAgents,
};
use crate::ftc::{discretize_state, enumerate_actions, speed_candidates, FtcAction, FtcRawState, MAX_SPEED_KMH};
use crate::mesosim::RED_DURATIONS_S;
use crate::netmodel::NetworkTopology;
use crate::qcore::{ActionKey, ConvergenceMonitor, ExplorationSchedule, QTable, SelectionMode, StateKey};
use crate::{Error, Result};

/// Freeway control strategies, in reporting order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    None,
    Feedback,
    QlUncoordinated,
    QlCoordinated,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::None, Strategy::Feedback, Strategy::QlUncoordinated, Strategy::QlCoordinated];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Feedback => "feedback",
            Strategy::QlUncoordinated => "ql_uncoordinated",
            Strategy::QlCoordinated => "ql_coordinated",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown strategy '{s}'")))
    }
}

/// What a section controller sees at a control-cycle boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionObservation {
    pub raw: FtcRawState,
    /// Reward earned over the cycle that just ended; `None` at the first boundary.
    pub reward: Option<f64>,
    pub desired_density_veh_km: f64,
    pub occupancy: f64,
    pub has_onramp: bool,
}

/// Training-time machinery attached to a learning agent.
#[derive(Debug)]
pub struct Learning<'a> {
    pub monitor: &'a mut ConvergenceMonitor,
    pub rng: ChaCha8Rng,
    pub schedule: ExplorationSchedule,
}

/// A Q-learning agent either frozen (greedy, read-only) or learning.
#[derive(Debug)]
pub enum Agent<'a, T> {
    Frozen(&'a T),
    Learning(&'a mut T, Learning<'a>),
}

/// Per-episode learning statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub reward_sum: f64,
    pub rewards: u64,
    pub updates: u64,
    pub max_abs_dq: f64,
}

impl PolicyStats {
    pub fn mean_reward(&self) -> f64 {
        if self.rewards == 0 {
            0.0
        } else {
            self.reward_sum / self.rewards as f64
        }
    }
}

enum Kind<'a> {
    NoControl,
    Feedback { gains: Vec<FeedbackGains>, memory: Vec<FeedbackControls>, reference_queue_m: f64 },
    Coordinated { agent: Agent<'a, QTable>, prev: Vec<Option<(StateKey, ActionKey)>> },
    Uncoordinated { agent: Agent<'a, SubAgents>, prev: Vec<[Option<(StateKey, ActionKey)>; 3]> },
}

/// Section-level controller driven once per control cycle.
pub struct Policy<'a> {
    kind: Kind<'a>,
    pub stats: PolicyStats,
}

impl<'a> Policy<'a> {
    pub fn no_control() -> Self {
        Self { kind: Kind::NoControl, stats: PolicyStats::default() }
    }

    pub fn feedback(net: &NetworkTopology, reference_queue_m: f64) -> Self {
        let gains = net
            .sections
            .iter()
            .map(|s| FeedbackGains::for_section(&s.fd, s.lane_count, net.vehicle_spacing_m))
            .collect();
        Self::feedback_with(gains, reference_queue_m)
    }

    pub fn feedback_with(gains: Vec<FeedbackGains>, reference_queue_m: f64) -> Self {
        let memory = vec![FeedbackControls::default(); gains.len()];
        Self { kind: Kind::Feedback { gains, memory, reference_queue_m }, stats: PolicyStats::default() }
    }

    pub fn coordinated(agent: Agent<'a, QTable>) -> Self {
        Self { kind: Kind::Coordinated { agent, prev: Vec::new() }, stats: PolicyStats::default() }
    }

    pub fn uncoordinated(agent: Agent<'a, SubAgents>) -> Self {
        Self { kind: Kind::Uncoordinated { agent, prev: Vec::new() }, stats: PolicyStats::default() }
    }

    pub fn strategy(&self) -> Strategy {
        match self.kind {
            Kind::NoControl => Strategy::None,
            Kind::Feedback { .. } => Strategy::Feedback,
            Kind::Coordinated { .. } => Strategy::QlCoordinated,
            Kind::Uncoordinated { .. } => Strategy::QlUncoordinated,
        }
    }

    /// Controls for the next cycle given per-section observations and current controls.
    pub fn act(&mut self, obs: &[SectionObservation], current: &[SectionControls]) -> Result<Vec<SectionControls>> {
        if obs.len() != current.len() {
            return Err(Error::InvalidInput("observation and control counts differ".into()));
        }
        for o in obs {
            if let Some(r) = o.reward {
                self.stats.reward_sum += r;
                self.stats.rewards += 1;
            }
        }
        let stats = &mut self.stats;
        match &mut self.kind {
            Kind::NoControl => Ok(vec![no_control(); obs.len()]),
            Kind::Feedback { gains, memory, reference_queue_m } => {
                if gains.len() != obs.len() {
                    return Err(Error::InvalidInput("feedback gains do not cover every section".into()));
                }
                let mut out = Vec::with_capacity(obs.len());
                for ((o, g), mem) in obs.iter().zip(gains.iter()).zip(memory.iter_mut()) {
                    let m = FeedbackMeasurement {
                        density_veh_km: o.raw.density_veh_km,
                        desired_density_veh_km: o.desired_density_veh_km,
                        occupancy: o.occupancy,
                        onramp_queue_m: o.raw.onramp_queue_m,
                        reference_queue_m: *reference_queue_m,
                        closed_lanes: o.raw.closed_lanes,
                    };
                    *mem = feedback_step(mem, &m, g);
                    out.push(SectionControls {
                        speed_limit_kmh: mem.speed_limit_kmh,
                        red_s: if o.has_onramp { mem.red_s() } else { 0.0 },
                        lc: mem.lc,
                    });
                }
                Ok(out)
            }
            Kind::Coordinated { agent, prev } => {
                prev.resize(obs.len(), None);
                let mut out = Vec::with_capacity(obs.len());
                for ((o, c), p) in obs.iter().zip(current).zip(prev.iter_mut()) {
                    let x = discretize_state(&o.raw);
                    let cands: Vec<ActionKey> = if o.has_onramp {
                        enumerate_actions(c.speed_limit_kmh)?.iter().map(FtcAction::key).collect()
                    } else {
                        speed_candidates(c.speed_limit_kmh)
                            .into_iter()
                            .map(|v| FtcAction { speed_limit_kmh: v, ..FtcAction::NEUTRAL }.key())
                            .collect()
                    };
                    let a = step_agent(agent_parts(agent), p.take(), o.reward, &x, &cands, stats)?;
                    let act = FtcAction::from_key(&a)?;
                    out.push(SectionControls { speed_limit_kmh: act.speed_limit_kmh, red_s: act.red_s, lc: act.lc });
                    *p = Some((x, a));
                }
                Ok(out)
            }
            Kind::Uncoordinated { agent, prev } => {
                prev.resize(obs.len(), [None, None, None]);
                let mut out = Vec::with_capacity(obs.len());
                for ((o, c), p) in obs.iter().zip(current).zip(prev.iter_mut()) {
                    let mut ctl = no_control();
                    for j in 0..3 {
                        let spec = match agent {
                            Agent::Frozen(a) => sub_agent(a, j),
                            Agent::Learning(a, _) => sub_agent(a, j),
                        };
                        let x = spec.state_key(&o.raw);
                        let mut cands = spec.candidates(c.speed_limit_kmh);
                        if !o.has_onramp && spec.kind != SubAgentKind::Vsl {
                            cands.truncate(1);
                        }
                        let kind = spec.kind;
                        let parts = match agent {
                            Agent::Frozen(a) => Parts::Frozen(&sub_agent(a, j).table),
                            Agent::Learning(a, l) => Parts::Learning(&mut sub_agent_mut(a, j).table, l),
                        };
                        let a = step_agent(parts, p[j].take(), o.reward, &x, &cands, stats)?;
                        match kind {
                            SubAgentKind::Vsl => ctl.speed_limit_kmh = MAX_SPEED_KMH - f64::from(a.0[0]),
                            SubAgentKind::Rm => ctl.red_s = RED_DURATIONS_S[a.0[0] as usize],
                            SubAgentKind::Lc => ctl.lc = a.0[0] == 1,
                        }
                        p[j] = Some((x, a));
                    }
                    out.push(ctl);
                }
                Ok(out)
            }
        }
    }
}

fn sub_agent(a: &SubAgents, j: usize) -> &SubAgentSpec {
    match j {
        0 => &a.vsl,
        1 => &a.rm,
        _ => &a.lc,
    }
}

fn sub_agent_mut(a: &mut SubAgents, j: usize) -> &mut SubAgentSpec {
    match j {
        0 => &mut a.vsl,
        1 => &mut a.rm,
        _ => &mut a.lc,
    }
}

enum Parts<'b, 'a> {
    Frozen(&'b QTable),
    Learning(&'b mut QTable, &'b mut Learning<'a>),
}

fn agent_parts<'b, 'a>(agent: &'b mut Agent<'a, QTable>) -> Parts<'b, 'a> {
    match agent {
        Agent::Frozen(t) => Parts::Frozen(t),
        Agent::Learning(t, l) => Parts::Learning(t, l),
    }
}

/// Applies the pending update (when learning) and picks the next action.
fn step_agent(
    parts: Parts<'_, '_>,
    prev: Option<(StateKey, ActionKey)>,
    reward: Option<f64>,
    x: &StateKey,
    cands: &[ActionKey],
    stats: &mut PolicyStats,
) -> Result<ActionKey> {
    match parts {
        Parts::Frozen(table) => table
            .greedy(x, cands)
            .cloned()
            .ok_or_else(|| Error::InvalidInput("empty candidate action set".into())),
        Parts::Learning(table, learning) => {
            if let (Some((px, pa)), Some(r)) = (prev, reward) {
                let dq = table.update(&px, &pa, r, x)?;
                learning.monitor.push(dq);
                stats.updates += 1;
                stats.max_abs_dq = stats.max_abs_dq.max(dq);
            }
            table.select_action(x, cands, &mut learning.rng, SelectionMode::Train(learning.schedule)).cloned()
        }
    }
}
