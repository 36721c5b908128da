use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::replication_seed;
use crate::mesosim::IsolatedScene;
use crate::tsc::{
    calibrate_cycle_model, default_cycle_space, flow_ratios, performance_index, CalibrationFit, CalibrationSample,
    DemandEstimate, SignalPlan,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Per-approach demand levels (veh/h).
    pub demands_veh_h: Vec<f64>,
    pub cycles_s: Vec<f64>,
    pub iterations: u32,
    /// Cycle of the reference run each performance index is relative to.
    pub base_cycle_s: f64,
    pub lost_time_s: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            demands_veh_h: (4..=20).map(|d| d as f64 * 100.0).collect(),
            cycles_s: default_cycle_space(),
            iterations: 2,
            base_cycle_s: 60.0,
            lost_time_s: 16.0,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub samples: Vec<CalibrationSample>,
    pub fit: CalibrationFit,
}

/// Simulates every (iteration, demand, cycle) on the isolated intersection, scores
/// each cycle by its performance index against the base cycle, and fits the cycle
/// model to the best cycle per demand level.
pub fn calibration_sweep(scene: &IsolatedScene, cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.demands_veh_h.is_empty() || cfg.cycles_s.is_empty() || cfg.iterations == 0 {
        return Err(Error::InvalidInput("calibration sweep needs demands, cycles and iterations".into()));
    }
    if cfg.cycles_s.iter().chain([&cfg.base_cycle_s]).any(|c| *c <= cfg.lost_time_s) {
        return Err(Error::InvalidInput("every cycle must exceed the lost time".into()));
    }
    let ix = &scene.intersection;
    let jobs: Vec<(u32, usize, f64)> = (1..=cfg.iterations)
        .flat_map(|it| cfg.demands_veh_h.iter().enumerate().map(move |(j, d)| (it, j, *d)))
        .collect();
    let groups = jobs
        .par_iter()
        .map(|&(iteration, j, demand)| {
            let est = DemandEstimate { east: demand, south: demand, west: demand, north: demand };
            let ratios = flow_ratios(&est, &ix.turn_ratios, ix.saturation_flow_veh_h)?;
            let seed = replication_seed(cfg.seed, (iteration as usize) * cfg.demands_veh_h.len() + j);
            let base = scene.run(&SignalPlan::new(cfg.base_cycle_s, cfg.lost_time_s, &ratios)?, demand, seed)?;
            cfg.cycles_s
                .iter()
                .map(|&cycle| {
                    let m = scene.run(&SignalPlan::new(cycle, cfg.lost_time_s, &ratios)?, demand, seed)?;
                    Ok(CalibrationSample {
                        iteration,
                        demand_veh_h: demand,
                        flow_ratio_sum: ratios.sum(),
                        cycle_s: cycle,
                        travel_time_s: m.travel_time_s,
                        fuel_g: m.fuel_g,
                        emission_g_km: m.emission_g_km,
                        base_travel_time_s: base.travel_time_s,
                        base_fuel_g: base.fuel_g,
                        base_emission_g_km: base.emission_g_km,
                        performance_index: performance_index(
                            m.travel_time_s,
                            m.fuel_g,
                            m.emission_g_km,
                            base.travel_time_s,
                            base.fuel_g,
                            base.emission_g_km,
                        )?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<CalibrationSample> = groups.into_iter().flatten().collect();
    let fit = calibrate_cycle_model(&samples, cfg.lost_time_s)?;
    Ok(SweepResult { samples, fit })
}
