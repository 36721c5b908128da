use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::experiment::{replication_seed, ScenarioSpec};
use super::policy::{Agent, Learning, Policy};
use super::runner::{run_scenario, RunOptions};
use super::signals::SignalMode;
use crate::baselines::SubAgents;
use crate::netmodel::{DemandLevel, NetworkPreset, ScenarioConfig};
use crate::qcore::{ConvergenceMonitor, ExplorationSchedule, QTable};
use crate::Result;

/// The learner being trained.
#[derive(Debug)]
pub enum TrainTarget<'a> {
    Coordinated(&'a mut QTable),
    Uncoordinated(&'a mut SubAgents),
}

impl TrainTarget<'_> {
    fn policy<'b>(&'b mut self, learning: Learning<'b>) -> Policy<'b> {
        match self {
            TrainTarget::Coordinated(t) => Policy::coordinated(Agent::Learning(t, learning)),
            TrainTarget::Uncoordinated(a) => Policy::uncoordinated(Agent::Learning(a, learning)),
        }
    }

    fn frozen(&self) -> Policy<'_> {
        match self {
            TrainTarget::Coordinated(t) => Policy::coordinated(Agent::Frozen(t)),
            TrainTarget::Uncoordinated(a) => Policy::uncoordinated(Agent::Frozen(a)),
        }
    }

    /// Stored state-action pairs over all tables.
    pub fn pair_count(&self) -> usize {
        match self {
            TrainTarget::Coordinated(t) => t.pair_count(),
            TrainTarget::Uncoordinated(a) => a.iter().map(|s| s.table.pair_count()).sum(),
        }
    }

    pub fn state_count(&self) -> usize {
        match self {
            TrainTarget::Coordinated(t) => t.state_count(),
            TrainTarget::Uncoordinated(a) => a.iter().map(|s| s.table.state_count()).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub seed: u64,
    pub demand_level: DemandLevel,
    pub incident: bool,
    pub control_steps: usize,
    pub mean_reward: f64,
    pub updates: u64,
    pub max_abs_dq: f64,
    /// Largest |dQ| within the trailing convergence window.
    pub window_max_dq: f64,
    pub states: usize,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineReport {
    pub converged: bool,
    pub episodes: usize,
    pub updates: u64,
    pub log: Vec<EpisodeLog>,
}

/// Episode scenario for offline training: single-section network, a demand level
/// drawn uniformly and, with the configured probability, a lane closure in the
/// section from the end of warm-up to the end of the episode.
pub fn offline_episode(base: &ScenarioConfig, level: DemandLevel, incident: bool) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.network = NetworkPreset::SingleSection;
    cfg.duration_s = base.agent.offline_episode_s;
    cfg.warmup_s = base.agent.offline_warmup_s;
    cfg.demand_level = level;
    cfg.incident.enabled = incident;
    cfg.incident.section = 1;
    cfg.incident.start_s = cfg.warmup_s;
    cfg.incident.clear_s = cfg.duration_s;
    cfg
}

/// Draws the demand level and incident occurrence of one training episode.
pub fn draw_episode<R: Rng + ?Sized>(rng: &mut R, incident_probability: f64) -> (DemandLevel, bool) {
    let level = if rng.random::<bool>() { DemandLevel::High } else { DemandLevel::Moderate };
    (level, rng.random::<f64>() < incident_probability)
}

/// Trains on single-section episodes until the trailing window of updates has
/// converged or the episode cap is reached (then the partial table is kept and a
/// warning is logged).
pub fn train_offline(
    base: &ScenarioConfig,
    target: &mut TrainTarget<'_>,
    schedule: ExplorationSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<OfflineReport> {
    let template = offline_episode(base, DemandLevel::Moderate, false);
    let net = template.build_network()?;
    let opts = RunOptions {
        drain_cap_s: 0.0,
        upstream_vsl: true,
        signal_mode: SignalMode::Responsive,
        record_density: false,
    };
    let mut monitor = ConvergenceMonitor::new(base.agent.convergence_window, base.agent.convergence_threshold);
    let mut log = Vec::new();
    for episode in 0..base.agent.offline_episode_cap {
        let (level, incident) = draw_episode(rng, base.agent.incident_probability);
        let cfg = offline_episode(base, level, incident);
        let seed = rng.random::<u64>();
        let learning = Learning { monitor: &mut monitor, rng: ChaCha8Rng::seed_from_u64(rng.random()), schedule };
        let mut policy = target.policy(learning);
        let out = run_scenario(&cfg, &net, &mut policy, &opts, seed)?;
        let stats = policy.stats;
        drop(policy);
        log.push(EpisodeLog {
            episode,
            seed,
            demand_level: level,
            incident,
            control_steps: out.control_cycles,
            mean_reward: stats.mean_reward(),
            updates: stats.updates,
            max_abs_dq: stats.max_abs_dq,
            window_max_dq: monitor.window_max(),
            states: target.state_count(),
            pairs: target.pair_count(),
        });
        if monitor.converged() {
            info!("offline training converged after {} episodes", episode + 1);
            return Ok(OfflineReport { converged: true, episodes: episode + 1, updates: monitor.updates_seen(), log });
        }
    }
    warn!("offline training hit the episode cap of {} without converging", base.agent.offline_episode_cap);
    Ok(OfflineReport { converged: false, episodes: log.len(), updates: monitor.updates_seen(), log })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// Frozen-policy means over the evaluation scenarios.
    pub travel_time_min: f64,
    /// Mean on-ramp plus arterial queue (m).
    pub queue_m: f64,
    /// Relative change against the previous iteration, positive when better.
    pub travel_time_improvement: Option<f64>,
    pub queue_improvement: Option<f64>,
    pub mean_reward: f64,
    pub states: usize,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    /// The stopping rule fired before the iteration cap.
    pub converged: bool,
    pub iterations: Vec<IterationLog>,
}

/// True once the last `patience` iterations each changed both metrics by less than
/// `threshold` (relative).
pub fn online_should_stop(log: &[IterationLog], threshold: f64, patience: usize) -> bool {
    patience > 0
        && log.len() >= patience
        && log[log.len() - patience..].iter().all(|it| {
            matches!((it.travel_time_improvement, it.queue_improvement),
                (Some(a), Some(b)) if a.abs() < threshold && b.abs() < threshold)
        })
}

/// Relative improvement `(previous - current) / previous`, 0 when `previous` is 0.
pub fn relative_improvement(previous: f64, current: f64) -> f64 {
    if previous.abs() > 0.0 {
        (previous - current) / previous
    } else {
        0.0
    }
}

/// Refines a table on the corridor: every iteration learns on the four scenarios,
/// then evaluates the frozen policy on fixed seeds.
pub fn train_online(
    base: &ScenarioConfig,
    target: &mut TrainTarget<'_>,
    scenarios: &[ScenarioSpec],
    opts: &RunOptions,
    schedule: ExplorationSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<OnlineReport> {
    let mut corridor = base.clone();
    corridor.network = NetworkPreset::I710;
    let net = corridor.build_network()?;
    let train_opts = RunOptions { drain_cap_s: 0.0, record_density: false, ..opts.clone() };
    let eval_opts = RunOptions { record_density: false, ..opts.clone() };
    let mut monitor = ConvergenceMonitor::new(base.agent.convergence_window, base.agent.convergence_threshold);
    let mut iterations: Vec<IterationLog> = Vec::new();
    for iteration in 0..base.agent.online_iteration_cap {
        let mut rewards = Vec::new();
        for spec in scenarios {
            let cfg = spec.apply(&corridor);
            let learning = Learning { monitor: &mut monitor, rng: ChaCha8Rng::seed_from_u64(rng.random()), schedule };
            let mut policy = target.policy(learning);
            run_scenario(&cfg, &net, &mut policy, &train_opts, rng.random())?;
            rewards.push(policy.stats.mean_reward());
        }
        let (mut tt, mut queue) = (0.0, 0.0);
        for (j, spec) in scenarios.iter().enumerate() {
            let cfg = spec.apply(&corridor);
            let mut policy = target.frozen();
            let out = run_scenario(&cfg, &net, &mut policy, &eval_opts, replication_seed(base.seed, j))?;
            tt += out.metrics.travel_time_min;
            queue += out.metrics.onramp_queue_m + out.metrics.arterial_queue_m;
        }
        let k = scenarios.len().max(1) as f64;
        let (tt, queue) = (tt / k, queue / k);
        let prev = iterations.last();
        iterations.push(IterationLog {
            iteration,
            travel_time_min: tt,
            queue_m: queue,
            travel_time_improvement: prev.map(|p| relative_improvement(p.travel_time_min, tt)),
            queue_improvement: prev.map(|p| relative_improvement(p.queue_m, queue)),
            mean_reward: rewards.iter().sum::<f64>() / k,
            states: target.state_count(),
            pairs: target.pair_count(),
        });
        info!("online iteration {iteration}: T_t {tt:.3} min, queue {queue:.1} m");
        if online_should_stop(
            &iterations,
            base.agent.online_improvement_threshold,
            base.agent.online_patience,
        ) {
            return Ok(OnlineReport { converged: true, iterations });
        }
    }
    warn!("online training hit the iteration cap of {}", base.agent.online_iteration_cap);
    Ok(OnlineReport { converged: false, iterations })
}
