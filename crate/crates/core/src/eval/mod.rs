//! Metrics, the closed control loop, training pipelines, multi-replication
//! evaluation, reports and the signal-timing calibration sweep.

mod calibration;
mod experiment;
mod metrics;
mod policy;
mod runner;
mod signals;
mod training;

pub use calibration::{calibration_sweep, SweepConfig, SweepResult};
pub use experiment::{
    evaluate, improvement_pct, replication_seed, report, scenario_matrix, write_density_csv, write_metrics_csv,
    Artifacts, EvaluationRow, EvaluationTable, ExperimentPlan, Improvements, ScenarioSpec,
};
pub use metrics::{
    arterial_queue_metric, emission_rate, mean_stops, onramp_queue_metric, qualifying_probes, travel_time,
    DensitySample, EmissionSummary, ProbeWindow, QueueAccumulator, RunMetrics,
};
pub use policy::{Agent, Learning, Policy, PolicyStats, SectionObservation, Strategy};
pub use runner::{run_scenario, RunOptions, RunOutput, MIN_DESIRED_DENSITY_VEH_KM};
pub use signals::{SignalMode, SignalRunner};
pub use training::{
    draw_episode, offline_episode, online_should_stop, relative_improvement, train_offline, train_online,
    EpisodeLog, IterationLog, OfflineReport, OnlineReport, TrainTarget,
};
