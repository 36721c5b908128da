use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::mesosim::Simulator;
use crate::netmodel::{DemandProfile, DemandSource, Direction, EntranceLocation, NetworkTopology, ScenarioConfig, TurnRatios};
use crate::tsc::{estimate_demands, CorridorInputs, CycleModel, DemandEstimate, SignalController, SignalPlan};
use crate::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalMode {
    /// Plans recomputed every control cycle from measured arterial inputs.
    #[default]
    Responsive,
    /// Plans fixed at the values implied by mean demands.
    FixedTime,
}

/// Arterial demand estimation and plan selection along the corridor.
#[derive(Clone, Debug)]
pub struct SignalRunner {
    mode: SignalMode,
    controller: SignalController,
    turn: Vec<TurnRatios>,
    saturation: Vec<[f64; 4]>,
    offramp_means: Vec<f64>,
    entrances: Vec<EntranceLocation>,
    source: DemandSource,
    window_s: f64,
    history: VecDeque<(f64, Vec<f64>)>,
    plans: Vec<SignalPlan>,
    estimates: Vec<DemandEstimate>,
}

impl SignalRunner {
    pub fn new(cfg: &ScenarioConfig, net: &NetworkTopology, profile: &DemandProfile, mode: SignalMode) -> Result<Self> {
        let k = net.intersections.len();
        let mut offramp_means = vec![0.0; k];
        for s in &net.sections {
            if let Some(r) = &s.offramp {
                offramp_means[r.connecting_intersection] += r.historical_mean_offramp_flow_veh_h;
            }
        }
        let means: Vec<f64> = profile.entrances.iter().map(|(loc, _)| profile.mean_at(*loc)).collect();
        let mut runner = Self {
            mode,
            controller: SignalController::new(CycleModel::new(
                cfg.signals.alpha1_s,
                cfg.signals.alpha2_s,
                cfg.signals.lost_time_s,
            )),
            turn: net.intersections.iter().map(|ix| ix.turn_ratios).collect(),
            saturation: net.intersections.iter().map(|ix| ix.saturation_flow_veh_h).collect(),
            offramp_means,
            entrances: profile.entrances.iter().map(|(loc, _)| *loc).collect(),
            source: cfg.signals.demand_source,
            window_s: cfg.signals.estimation_window_s,
            history: VecDeque::new(),
            plans: Vec::new(),
            estimates: Vec::new(),
        };
        runner.estimates = runner.estimate(&means)?;
        runner.plans = runner.select_plans()?;
        Ok(runner)
    }

    pub fn plans(&self) -> &[SignalPlan] {
        &self.plans
    }

    pub fn estimates(&self) -> &[DemandEstimate] {
        &self.estimates
    }

    /// Refreshes the estimates (from the configured input rates, or from entrance
    /// counts over the trailing window) and, in responsive mode, the plans.
    pub fn update(&mut self, sim: &Simulator) -> Result<()> {
        let rates = match self.source {
            DemandSource::KnownInputs if sim.time_s() > 0.0 => sim.demand_rates().to_vec(),
            DemandSource::KnownInputs => return Ok(()),
            DemandSource::MeasuredCounts => match self.measured_rates(sim) {
                Some(r) => r,
                None => return Ok(()),
            },
        };
        self.estimates = self.estimate(&rates)?;
        if self.mode == SignalMode::Responsive {
            self.plans = self.select_plans()?;
        }
        Ok(())
    }

    fn measured_rates(&mut self, sim: &Simulator) -> Option<Vec<f64>> {
        let t = sim.time_s();
        self.history.push_back((t, sim.counters().entrance_arrivals_veh.clone()));
        while self.history.len() > 2 && self.history[1].0 <= t - self.window_s + 1e-9 {
            self.history.pop_front();
        }
        let (t0, base) = &self.history[0];
        let span = t - t0;
        if span <= 0.0 {
            return None;
        }
        let (_, now) = self.history.back().expect("just pushed");
        Some(now.iter().zip(base).map(|(a, b)| (a - b) / span * 3600.0).collect())
    }

    fn estimate(&self, entrance_rates: &[f64]) -> Result<Vec<DemandEstimate>> {
        let mut inputs = CorridorInputs::zeros(self.turn.len());
        for (loc, rate) in self.entrances.iter().zip(entrance_rates) {
            if let EntranceLocation::Arterial { intersection, direction } = *loc {
                match direction {
                    Direction::East => inputs.east_veh_h[intersection] += rate,
                    Direction::West => inputs.west_veh_h[intersection] += rate,
                    Direction::South => inputs.south_boundary_veh_h += rate,
                    Direction::North => inputs.north_boundary_veh_h += rate,
                }
            }
        }
        estimate_demands(&inputs, &self.turn, &self.offramp_means)
    }

    fn select_plans(&self) -> Result<Vec<SignalPlan>> {
        self.estimates
            .iter()
            .zip(&self.turn)
            .zip(&self.saturation)
            .map(|((e, y), s)| self.controller.plan(e, y, *s))
            .collect()
    }
}
