use serde::{Deserialize, Serialize};

use super::demand::DemandProfile;
use super::fd::FundamentalDiagram;
use super::topology::{validate_topology, Direction, Movement, NetworkTopology};
use crate::tsc::{estimate_demands, CorridorInputs};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkPreset {
    I710,
    SingleSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandLevel {
    Moderate,
    High,
}

impl DemandLevel {
    pub fn multiplier(self) -> f64 {
        match self {
            DemandLevel::Moderate => 1.0,
            DemandLevel::High => 1.4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DemandLevel::Moderate => "moderate",
            DemandLevel::High => "high",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncidentConfig {
    pub enabled: bool,
    /// One-based section index.
    pub section: usize,
    pub start_s: f64,
    pub clear_s: f64,
}

impl Default for IncidentConfig {
    fn default() -> Self {
        Self { enabled: false, section: 4, start_s: 600.0, clear_s: 1800.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    pub mainline_mean_veh_h: f64,
    pub arterial_mean_veh_h: f64,
    /// Standard deviation as a fraction of the mean.
    pub cv: f64,
    /// How often each entrance redraws its hourly rate.
    pub refresh_s: f64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self { mainline_mean_veh_h: 7000.0, arterial_mean_veh_h: 600.0, cv: 0.1, refresh_s: 300.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreewayConfig {
    pub capacity_veh_h: f64,
    pub free_flow_speed_kmh: f64,
    pub backward_wave_kmh: f64,
    pub outflow_wave_kmh: f64,
    pub capacity_drop: f64,
    /// Residual capacity drop at a lane drop while lane-change advisories are active.
    pub lc_capacity_drop: f64,
    pub lc_zone_m: f64,
    /// Extra share of merge supply granted to the on-ramp while its advisory is on.
    pub lc_merge_boost: f64,
    /// Share of merge supply the on-ramp can claim when the merge is saturated.
    pub onramp_merge_share: f64,
    pub onramp_storage_m: f64,
    pub offramp_exit_ratio: f64,
    pub onramp_share: f64,
    pub vehicle_spacing_m: f64,
    pub cell_length_km: f64,
    pub probe_headway_s: f64,
}

impl Default for FreewayConfig {
    fn default() -> Self {
        Self {
            capacity_veh_h: 10_000.0,
            free_flow_speed_kmh: 100.0,
            backward_wave_kmh: 25.0,
            outflow_wave_kmh: 30.0,
            capacity_drop: 0.15,
            lc_capacity_drop: 0.05,
            lc_zone_m: 800.0,
            lc_merge_boost: 0.10,
            onramp_merge_share: 0.2,
            onramp_storage_m: 300.0,
            offramp_exit_ratio: super::topology::DEFAULT_EXIT_RATIO,
            onramp_share: super::topology::DEFAULT_ONRAMP_SHARE,
            vehicle_spacing_m: 7.5,
            cell_length_km: 0.4,
            probe_headway_s: 10.0,
        }
    }
}

impl FreewayConfig {
    pub fn fundamental_diagram(&self) -> Result<FundamentalDiagram> {
        FundamentalDiagram::from_capacity(
            self.capacity_veh_h,
            self.free_flow_speed_kmh,
            self.backward_wave_kmh,
            self.outflow_wave_kmh,
            self.capacity_drop,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    pub alpha1_s: f64,
    pub alpha2_s: f64,
    pub lost_time_s: f64,
    pub saturation_flow_veh_h: f64,
    pub demand_source: DemandSource,
    /// Window of entrance counts feeding the demand estimate with measured counts.
    pub estimation_window_s: f64,
}

/// Where the arterial demand estimate takes its corridor inputs from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandSource {
    /// The input rates currently configured at the entrances.
    #[default]
    KnownInputs,
    /// Arrivals counted over the trailing estimation window.
    MeasuredCounts,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            alpha1_s: 136.8,
            alpha2_s: -357.7,
            lost_time_s: 16.0,
            saturation_flow_veh_h: 7200.0,
            demand_source: DemandSource::KnownInputs,
            estimation_window_s: 300.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub discount: f64,
    pub reference_queue_m: f64,
    pub convergence_window: usize,
    pub convergence_threshold: f64,
    pub offline_episode_cap: usize,
    pub online_iteration_cap: usize,
    pub incident_probability: f64,
    pub offline_episode_s: f64,
    pub offline_warmup_s: f64,
    /// Relative improvement below which an online iteration counts as trivial.
    pub online_improvement_threshold: f64,
    pub online_patience: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            discount: 0.9,
            reference_queue_m: 300.0,
            convergence_window: 10_000,
            convergence_threshold: 0.01,
            offline_episode_cap: 200_000,
            online_iteration_cap: 50,
            incident_probability: 0.2,
            offline_episode_s: 1800.0,
            offline_warmup_s: 300.0,
            online_improvement_threshold: 0.01,
            online_patience: 3,
        }
    }
}

/// Everything needed to run one simulation: network, demand, incident and timing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: NetworkPreset,
    pub demand_level: DemandLevel,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub control_cycle_s: f64,
    pub tick_s: f64,
    pub seed: u64,
    pub incident: IncidentConfig,
    pub demand: DemandConfig,
    pub freeway: FreewayConfig,
    pub signals: SignalConfig,
    pub agent: AgentConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            network: NetworkPreset::I710,
            demand_level: DemandLevel::Moderate,
            duration_s: 2400.0,
            warmup_s: 600.0,
            control_cycle_s: 30.0,
            tick_s: 1.0,
            seed: 1,
            incident: IncidentConfig::default(),
            demand: DemandConfig::default(),
            freeway: FreewayConfig::default(),
            signals: SignalConfig::default(),
            agent: AgentConfig::default(),
        }
    }
}

/// Parses a scenario document and applies defaults for every absent field.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            }
            None => "document".to_string(),
        };
        Error::Parse { location, message: e.message().trim().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_scenario(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("scenario config always serializes")
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Semantic(m));
        if !(self.duration_s > 0.0) {
            return fail(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.duration_s) {
            return fail(format!("warmup_s ({}) must be below duration_s ({})", self.warmup_s, self.duration_s));
        }
        if !(self.control_cycle_s > 0.0) {
            return fail("control_cycle_s must be positive".into());
        }
        if !(self.tick_s > 0.0) {
            return fail("tick_s must be positive".into());
        }
        let ratio = self.control_cycle_s / self.tick_s;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return fail(format!(
                "tick_s ({}) must divide control_cycle_s ({})",
                self.tick_s, self.control_cycle_s
            ));
        }
        if self.incident.enabled {
            let inc = &self.incident;
            if inc.section == 0 {
                return fail("incident.section is one-based".into());
            }
            if !(inc.start_s >= 0.0 && inc.clear_s > inc.start_s && inc.clear_s <= self.duration_s) {
                return fail(format!(
                    "incident window [{}, {}] must lie within the run [0, {}]",
                    inc.start_s, inc.clear_s, self.duration_s
                ));
            }
        }
        let d = &self.demand;
        if !(d.mainline_mean_veh_h >= 0.0 && d.arterial_mean_veh_h >= 0.0 && d.cv >= 0.0 && d.refresh_s > 0.0) {
            return fail("demand means and cv must be nonnegative, refresh_s positive".into());
        }
        let a = &self.agent;
        if !(0.0..1.0).contains(&a.discount) {
            return fail(format!("agent.discount must lie in [0, 1), got {}", a.discount));
        }
        if !(a.reference_queue_m > 0.0) {
            return fail("agent.reference_queue_m must be positive".into());
        }
        if !(0.0..=1.0).contains(&a.incident_probability) {
            return fail("agent.incident_probability must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn control_ticks(&self) -> usize {
        (self.control_cycle_s / self.tick_s).round() as usize
    }

    /// Builds the topology with configured parameters and historical off-ramp means,
    /// then checks it with [`validate_topology`].
    pub fn build_network(&self) -> Result<NetworkTopology> {
        let fd = self.freeway.fundamental_diagram()?;
        let mut net = match self.network {
            NetworkPreset::I710 => NetworkTopology::i710_corridor(fd),
            NetworkPreset::SingleSection => NetworkTopology::single_section(fd),
        };
        net.cell_length_km = self.freeway.cell_length_km;
        net.onramp_share = self.freeway.onramp_share;
        net.vehicle_spacing_m = self.freeway.vehicle_spacing_m;
        for ix in &mut net.intersections {
            ix.saturation_flow_veh_h = [self.signals.saturation_flow_veh_h; 4];
        }
        for s in &mut net.sections {
            if let Some(r) = s.onramp.as_mut() {
                r.storage_length_m = self.freeway.onramp_storage_m;
            }
            if let Some(r) = s.offramp.as_mut() {
                r.exit_ratio = self.freeway.offramp_exit_ratio;
            }
        }
        if self.incident.enabled && self.incident.section > net.sections.len() {
            return Err(Error::Semantic(format!(
                "incident section {} does not exist (network has {})",
                self.incident.section,
                net.sections.len()
            )));
        }
        // historical means come from the moderate-level nominal flows
        let nominal = DemandProfile::for_network(
            &net,
            self.demand.mainline_mean_veh_h,
            self.demand.arterial_mean_veh_h,
            self.demand.cv,
            1.0,
        );
        let flows = nominal_flows(&net, &nominal)?;
        for (s, off) in net.sections.iter_mut().zip(&flows.offramp_veh_h) {
            if let Some(r) = s.offramp.as_mut() {
                r.historical_mean_offramp_flow_veh_h = *off;
            }
        }
        let report = validate_topology(&net);
        if !report.is_empty() {
            return Err(Error::Semantic(report.to_string()));
        }
        Ok(net)
    }

    pub fn build_demand(&self, net: &NetworkTopology) -> DemandProfile {
        DemandProfile::for_network(
            net,
            self.demand.mainline_mean_veh_h,
            self.demand.arterial_mean_veh_h,
            self.demand.cv,
            self.demand_level.multiplier(),
        )
    }

    /// Zero-based incident section, when an incident is configured.
    pub fn incident_section(&self) -> Option<usize> {
        self.incident.enabled.then(|| self.incident.section - 1)
    }
}

/// Steady flows implied by mean demands with unsaturated links.
#[derive(Clone, Debug, PartialEq)]
pub struct NominalFlows {
    /// Mainline flow entering each section.
    pub mainline_in_veh_h: Vec<f64>,
    pub onramp_veh_h: Vec<f64>,
    pub offramp_veh_h: Vec<f64>,
}

/// Fixed point of demand estimation and mainline propagation under mean demands.
pub fn nominal_flows(net: &NetworkTopology, demand: &DemandProfile) -> Result<NominalFlows> {
    use super::demand::EntranceLocation;
    let k = net.intersections.len();
    let n = net.sections.len();
    let mut inputs = CorridorInputs::zeros(k);
    for (loc, _) in &demand.entrances {
        if let EntranceLocation::Arterial { intersection, direction } = *loc {
            let mean = demand.mean_at(*loc);
            match direction {
                Direction::East => inputs.east_veh_h[intersection] = mean,
                Direction::West => inputs.west_veh_h[intersection] = mean,
                Direction::South => inputs.south_boundary_veh_h = mean,
                Direction::North => inputs.north_boundary_veh_h = mean,
            }
        }
    }
    let turn: Vec<_> = net.intersections.iter().map(|ix| ix.turn_ratios).collect();
    let mut offramp_at_ix = vec![0.0; k];
    let mut flows = NominalFlows {
        mainline_in_veh_h: vec![0.0; n],
        onramp_veh_h: vec![0.0; n],
        offramp_veh_h: vec![0.0; n],
    };
    for _ in 0..100 {
        let est = estimate_demands(&inputs, &turn, &offramp_at_ix)?;
        let mut q = demand.mainline_mean();
        let mut next_off = vec![0.0; k];
        for (i, s) in net.sections.iter().enumerate() {
            flows.mainline_in_veh_h[i] = q;
            let off = s.offramp.as_ref().map_or(0.0, |r| r.exit_ratio * q);
            if let Some(r) = &s.offramp {
                next_off[r.connecting_intersection] += off;
            }
            flows.offramp_veh_h[i] = off;
            q -= off;
            let on = s.onramp.as_ref().map_or(0.0, |r| {
                let ix = r.connecting_intersection;
                let y = &turn[ix];
                let e = &est[ix];
                net.onramp_share
                    * (y.get(Direction::East, Movement::Through) * e.east
                        + y.get(Direction::North, Movement::Right) * e.north
                        + y.get(Direction::South, Movement::Left) * e.south)
            });
            flows.onramp_veh_h[i] = on;
            q += on;
        }
        let delta: f64 = next_off.iter().zip(&offramp_at_ix).map(|(a, b)| (a - b).abs()).sum();
        offramp_at_ix = next_off;
        if delta < 1e-9 {
            break;
        }
    }
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = load_scenario("demand_level = \"high\"\n").unwrap();
        assert_eq!(cfg.demand_level, DemandLevel::High);
        assert_eq!(cfg.control_cycle_s, 30.0);
        assert_eq!(cfg.warmup_s, 600.0);
        assert_eq!(cfg.duration_s, 2400.0);
        assert_eq!(cfg.freeway.onramp_storage_m, 300.0);
        assert!(!cfg.incident.enabled);
    }

    #[test]
    fn warmup_longer_than_run_is_rejected() {
        let err = load_scenario("duration_s = 600\nwarmup_s = 900\n").unwrap_err();
        assert!(matches!(err, Error::Semantic(_)), "{err}");
    }

    #[test]
    fn high_demand_with_incident() {
        let cfg = load_scenario("demand_level = \"high\"\n[incident]\nenabled = true\n").unwrap();
        assert!((cfg.demand_level.multiplier() - 1.4).abs() < 1e-12);
        assert_eq!(cfg.incident.start_s, 600.0);
        assert_eq!(cfg.incident.clear_s, 1800.0);
        assert_eq!(cfg.incident_section(), Some(3));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = load_scenario("seed = 3\nduration_s = \"long\"\n").unwrap_err();
        match err {
            Error::Parse { location, .. } => assert_eq!(location, "line 2"),
            other => panic!("unexpected {other}"),
        }
        let err = load_scenario("[freeway]\ncapacity = 5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn tick_must_divide_cycle() {
        assert!(load_scenario("tick_s = 7\n").is_err());
    }

    #[test]
    fn nominal_offramp_means_are_positive() {
        let cfg = ScenarioConfig::default();
        let net = cfg.build_network().unwrap();
        for s in &net.sections {
            let off = s.offramp.as_ref().unwrap();
            assert!(off.historical_mean_offramp_flow_veh_h > 400.0);
        }
    }
}
