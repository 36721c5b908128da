use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{DensitySample, RunMetrics};
use super::policy::{Agent, Policy, Strategy};
use super::runner::{run_scenario, RunOptions};
use crate::baselines::SubAgents;
use crate::netmodel::{DemandLevel, NetworkPreset, ScenarioConfig};
use crate::qcore::QTable;
use crate::tsc::csv_err;
use crate::{Error, Result};

/// One cell of the scenario matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub demand_level: DemandLevel,
    pub incident: bool,
}

impl ScenarioSpec {
    pub fn name(&self) -> String {
        format!("{}_{}", self.demand_level.name(), if self.incident { "incident" } else { "no_incident" })
    }

    /// The base configuration with this cell's demand level and incident switch.
    pub fn apply(&self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut cfg = base.clone();
        cfg.demand_level = self.demand_level;
        cfg.incident.enabled = self.incident;
        cfg
    }
}

/// Moderate and high demand, each without and with the lane closure.
pub fn scenario_matrix() -> Vec<ScenarioSpec> {
    let mut out = Vec::with_capacity(4);
    for demand_level in [DemandLevel::Moderate, DemandLevel::High] {
        for incident in [false, true] {
            out.push(ScenarioSpec { demand_level, incident });
        }
    }
    out
}

/// Seed of replication `r`: a SplitMix64 step from the base, distinct for distinct `r`.
pub fn replication_seed(base: u64, r: usize) -> u64 {
    let mut z = base.wrapping_add((r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub scenarios: Vec<ScenarioSpec>,
    pub replications: usize,
    pub seed_base: u64,
    pub strategies: Vec<Strategy>,
    /// Run options of the coordinated strategy; the others use the same options
    /// with the upstream speed-limit zone off.
    pub options: RunOptions,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            scenarios: scenario_matrix(),
            replications: 10,
            seed_base: 1,
            strategies: Strategy::ALL.to_vec(),
            options: RunOptions::default(),
        }
    }
}

/// Trained agents needed by the learning strategies.
#[derive(Clone, Copy, Debug, Default)]
pub struct Artifacts<'a> {
    pub coordinated: Option<&'a QTable>,
    pub uncoordinated: Option<&'a SubAgents>,
}

/// Percentage reductions against no control, positive when better.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Improvements {
    pub travel_time_pct: f64,
    pub stops_pct: f64,
    pub emission_pct: f64,
    pub fuel_pct: f64,
    pub onramp_queue_pct: f64,
    pub arterial_queue_pct: f64,
}

/// `(base - value) / base` in percent; 0 when the base is 0.
pub fn improvement_pct(base: f64, value: f64) -> f64 {
    if base.abs() > 0.0 {
        (base - value) / base * 100.0
    } else {
        0.0
    }
}

impl Improvements {
    pub fn between(base: &RunMetrics, m: &RunMetrics) -> Self {
        Self {
            travel_time_pct: improvement_pct(base.travel_time_min, m.travel_time_min),
            stops_pct: improvement_pct(base.stops, m.stops),
            emission_pct: improvement_pct(base.emission_g_km, m.emission_g_km),
            fuel_pct: improvement_pct(base.fuel_g_km, m.fuel_g_km),
            onramp_queue_pct: improvement_pct(base.onramp_queue_m, m.onramp_queue_m),
            arterial_queue_pct: improvement_pct(base.arterial_queue_m, m.arterial_queue_m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub scenario: ScenarioSpec,
    pub strategy: Strategy,
    /// Means over replications.
    pub metrics: RunMetrics,
    /// Against no control in the same scenario; `None` when no control was not run.
    pub improvement: Option<Improvements>,
    pub runs: Vec<RunMetrics>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationTable {
    pub rows: Vec<EvaluationRow>,
}

impl EvaluationTable {
    pub fn get(&self, scenario: &ScenarioSpec, strategy: Strategy) -> Option<&EvaluationRow> {
        self.rows.iter().find(|r| r.scenario == *scenario && r.strategy == strategy)
    }
}

/// Runs every scenario, strategy and replication of the plan on the corridor.
/// Replications run in parallel with independent seeds; rows are ordered by
/// scenario, then strategy in reporting order.
pub fn evaluate(base: &ScenarioConfig, plan: &ExperimentPlan, artifacts: &Artifacts<'_>) -> Result<EvaluationTable> {
    if plan.replications == 0 {
        return Err(Error::InvalidInput("replication count must be positive".into()));
    }
    let mut strategies = plan.strategies.clone();
    strategies.sort();
    strategies.dedup();
    for s in &strategies {
        match s {
            Strategy::QlCoordinated if artifacts.coordinated.is_none() => {
                return Err(Error::MissingArtifact("coordinated Q-table".into()))
            }
            Strategy::QlUncoordinated if artifacts.uncoordinated.is_none() => {
                return Err(Error::MissingArtifact("uncoordinated sub-agent tables".into()))
            }
            _ => {}
        }
    }
    let mut corridor = base.clone();
    corridor.network = NetworkPreset::I710;
    let net = corridor.build_network()?;
    let seeds: Vec<u64> = (0..plan.replications).map(|r| replication_seed(plan.seed_base, r)).collect();
    let mut table = EvaluationTable::default();
    for spec in &plan.scenarios {
        let cfg = spec.apply(&corridor);
        let first_row = table.rows.len();
        for &strategy in &strategies {
            let runs = seeds
                .par_iter()
                .map(|&seed| {
                    let mut policy = match strategy {
                        Strategy::None => Policy::no_control(),
                        Strategy::Feedback => Policy::feedback(&net, cfg.agent.reference_queue_m),
                        Strategy::QlUncoordinated => {
                            Policy::uncoordinated(Agent::Frozen(artifacts.uncoordinated.expect("checked")))
                        }
                        Strategy::QlCoordinated => {
                            Policy::coordinated(Agent::Frozen(artifacts.coordinated.expect("checked")))
                        }
                    };
                    run_scenario(&cfg, &net, &mut policy, &plan.options, seed).map(|o| o.metrics)
                })
                .collect::<Result<Vec<_>>>()?;
            table.rows.push(EvaluationRow {
                scenario: *spec,
                strategy,
                metrics: RunMetrics::mean_of(&runs),
                improvement: None,
                runs,
                seeds: seeds.clone(),
            });
        }
        let base_metrics = table.rows[first_row..]
            .iter()
            .find(|r| r.strategy == Strategy::None)
            .map(|r| r.metrics.clone());
        if let Some(b) = base_metrics {
            for row in &mut table.rows[first_row..] {
                row.improvement = Some(Improvements::between(&b, &row.metrics));
            }
        }
    }
    Ok(table)
}

#[derive(Serialize)]
struct MetricsRecord<'a> {
    scenario: String,
    strategy: &'a str,
    replications: usize,
    travel_time_min: f64,
    travel_time_impr_pct: Option<f64>,
    stops: f64,
    stops_impr_pct: Option<f64>,
    emission_g_km: f64,
    emission_impr_pct: Option<f64>,
    fuel_g_km: f64,
    fuel_impr_pct: Option<f64>,
    onramp_queue_m: f64,
    onramp_queue_impr_pct: Option<f64>,
    arterial_queue_m: f64,
    arterial_queue_impr_pct: Option<f64>,
    probes: usize,
    missing: bool,
}

/// Strategy-by-metric table with improvement percentages against no control.
pub fn write_metrics_csv<W: Write>(table: &EvaluationTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &table.rows {
        let m = &r.metrics;
        let i = r.improvement;
        w.serialize(MetricsRecord {
            scenario: r.scenario.name(),
            strategy: r.strategy.name(),
            replications: r.runs.len(),
            travel_time_min: m.travel_time_min,
            travel_time_impr_pct: i.map(|i| i.travel_time_pct),
            stops: m.stops,
            stops_impr_pct: i.map(|i| i.stops_pct),
            emission_g_km: m.emission_g_km,
            emission_impr_pct: i.map(|i| i.emission_pct),
            fuel_g_km: m.fuel_g_km,
            fuel_impr_pct: i.map(|i| i.fuel_pct),
            onramp_queue_m: m.onramp_queue_m,
            onramp_queue_impr_pct: i.map(|i| i.onramp_queue_pct),
            arterial_queue_m: m.arterial_queue_m,
            arterial_queue_impr_pct: i.map(|i| i.arterial_queue_pct),
            probes: m.probes,
            missing: m.missing,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DensityRecord {
    time: f64,
    density: f64,
    rho_star: f64,
}

/// Density series of one section: `time, density, rho_star`.
pub fn write_density_csv<W: Write>(samples: &[DensitySample], section: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples.iter().filter(|s| s.section == section) {
        w.serialize(DensityRecord { time: s.time_s, density: s.density, rho_star: s.rho_star }).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `metrics.csv` and one density file per scenario, strategy and section
/// into `dir`; returns the written paths in order.
pub fn report(table: &EvaluationTable, dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("metrics.csv");
    write_metrics_csv(table, std::fs::File::create(&path)?)?;
    written.push(path);
    for r in &table.rows {
        let mut sections: Vec<usize> = r.metrics.density.iter().map(|s| s.section).collect();
        sections.sort_unstable();
        sections.dedup();
        for s in sections {
            let path = dir.join(format!("density_{}_{}_s{}.csv", r.scenario.name(), r.strategy.name(), s));
            write_density_csv(&r.metrics.density, s, std::fs::File::create(&path)?)?;
            written.push(path);
        }
    }
    Ok(written)
}
