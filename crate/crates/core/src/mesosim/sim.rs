use std::collections::VecDeque;
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arterial::IntersectionState;
use super::capacity::{bottleneck_capacity, metering_rate};
use super::demand::DemandSampler;
use super::probe::{advance_probe, CellSpan, ProbeOrigin, ProbeVehicle, SectionCrossing};
use crate::netmodel::{
    DemandProfile, Direction, EntranceLocation, FundamentalDiagram, Movement, NetworkTopology, ScenarioConfig,
};
use crate::tsc::SignalPlan;
use crate::{Error, Result};

/// Lane closure active over `[start_s, clear_s)` at the downstream end of `section`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidentWindow {
    pub section: usize,
    pub start_s: f64,
    pub clear_s: f64,
}

impl IncidentWindow {
    pub fn active_at(&self, t_s: f64) -> bool {
        t_s >= self.start_s && t_s < self.clear_s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    pub dt_s: f64,
    /// Capacity drop at the lane closure while lane-change advisories are active.
    pub lc_capacity_drop: f64,
    /// Relative increase of merge receiving capacity with on-ramp advisories.
    pub lc_merge_boost: f64,
    /// Share of merge supply reserved for the on-ramp when both sides are queued.
    pub onramp_merge_share: f64,
    pub offramp_capacity_veh_h: f64,
    pub probe_headway_s: f64,
    pub demand_refresh_s: f64,
    pub incident: Option<IncidentWindow>,
    pub trace: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt_s: 1.0,
            lc_capacity_drop: 0.05,
            lc_merge_boost: 0.10,
            onramp_merge_share: 0.2,
            offramp_capacity_veh_h: 2000.0,
            probe_headway_s: 10.0,
            demand_refresh_s: 300.0,
            incident: None,
            trace: false,
        }
    }
}

impl SimParams {
    pub fn from_scenario(cfg: &ScenarioConfig) -> Self {
        Self {
            dt_s: cfg.tick_s,
            lc_capacity_drop: cfg.freeway.lc_capacity_drop,
            lc_merge_boost: cfg.freeway.lc_merge_boost,
            onramp_merge_share: cfg.freeway.onramp_merge_share,
            probe_headway_s: cfg.freeway.probe_headway_s,
            demand_refresh_s: cfg.demand.refresh_s,
            incident: cfg.incident_section().map(|section| IncidentWindow {
                section,
                start_s: cfg.incident.start_s,
                clear_s: cfg.incident.clear_s,
            }),
            ..Self::default()
        }
    }
}

/// Per-step control inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    /// Speed limit of every freeway section (km/h).
    pub speed_limits_kmh: Vec<f64>,
    /// Ramp-meter red duration per section; ignored where there is no on-ramp.
    pub red_s: Vec<f64>,
    /// On-ramp merge advisories per section.
    pub lc_merge: Vec<bool>,
    /// Advisories upstream of the lane closure.
    pub lc_lane_drop: bool,
    /// Speed limit of the zone just upstream of section 1.
    pub upstream_limit_kmh: f64,
    /// Length of that zone, measured upstream from the start of section 1.
    pub upstream_zone_km: f64,
    /// Signal plan to run from the next cycle boundary, per intersection.
    pub plans: Vec<SignalPlan>,
}

impl ControlVector {
    /// Everything off: free-flow limits, unmetered ramps, no advisories.
    pub fn inactive(net: &NetworkTopology, plans: Vec<SignalPlan>) -> Self {
        let n = net.sections.len();
        let vf = net.sections.first().map_or(100.0, |s| s.fd.free_flow_speed_kmh);
        Self {
            speed_limits_kmh: net.sections.iter().map(|s| s.fd.free_flow_speed_kmh).collect(),
            red_s: vec![0.0; n],
            lc_merge: vec![false; n],
            lc_lane_drop: false,
            upstream_limit_kmh: vf,
            upstream_zone_km: 0.0,
            plans,
        }
    }

    fn check(&self, net: &NetworkTopology) -> Result<()> {
        let n = net.sections.len();
        if self.speed_limits_kmh.len() != n || self.red_s.len() != n || self.lc_merge.len() != n {
            return Err(Error::InvalidInput(format!("control vector must cover all {n} sections")));
        }
        if self.plans.len() != net.intersections.len() {
            return Err(Error::InvalidInput(format!(
                "control vector must carry a plan for all {} intersections",
                net.intersections.len()
            )));
        }
        for (i, (v, s)) in self.speed_limits_kmh.iter().zip(&net.sections).enumerate() {
            if !(*v > 0.0) || *v > s.fd.free_flow_speed_kmh + 1e-9 {
                return Err(Error::InvalidInput(format!("section {}: speed limit {v} out of range", i + 1)));
            }
        }
        let vf = net.sections.first().map_or(100.0, |s| s.fd.free_flow_speed_kmh);
        if !(self.upstream_limit_kmh > 0.0) || self.upstream_limit_kmh > vf + 1e-9 {
            return Err(Error::InvalidInput(format!("upstream speed limit {} out of range", self.upstream_limit_kmh)));
        }
        Ok(())
    }
}

/// Aggregate state of one freeway section over the last step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SectionState {
    pub density_veh_km: f64,
    pub inflow_veh_h: f64,
    pub outflow_veh_h: f64,
    pub onramp_veh_h: f64,
    pub offramp_veh_h: f64,
    pub closed_lanes: u32,
    pub speed_limit_kmh: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampQueueState {
    pub vehicles: f64,
    pub storage_veh: f64,
    pub spacing_m: f64,
    /// Arrivals refused because the ramp was full.
    pub blocked_veh: f64,
}

impl RampQueueState {
    pub fn queue_m(&self) -> f64 {
        self.vehicles * self.spacing_m
    }

    pub fn space_veh(&self) -> f64 {
        (self.storage_veh - self.vehicles).max(0.0)
    }
}

/// Vehicles that entered and left the network so far.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleLedger {
    pub entered: f64,
    pub exited: f64,
}

/// Running totals since the start of the run; controllers difference them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub section_in_veh: Vec<f64>,
    pub section_out_veh: Vec<f64>,
    pub onramp_veh: Vec<f64>,
    pub offramp_veh: Vec<f64>,
    pub onramp_arrivals_veh: Vec<f64>,
    /// Integral of section density over time (veh/km * s).
    pub density_time: Vec<f64>,
    /// Vehicle-km and vehicle-hours travelled per section.
    pub vkt: Vec<f64>,
    pub vht: Vec<f64>,
    /// Arrivals per demand-profile entrance.
    pub entrance_arrivals_veh: Vec<f64>,
    pub mainline_entered_veh: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub time_s: f64,
    pub tick: u64,
    /// Vehicles stored in each cell.
    pub cell_veh: Vec<f64>,
    pub sections: Vec<SectionState>,
    pub entrance_queue_veh: f64,
    pub onramps: Vec<Option<RampQueueState>>,
    pub intersections: Vec<IntersectionState>,
    /// Flow in transit towards the next intersection southwards, per origin.
    pub links_south: Vec<VecDeque<f64>>,
    /// Flow in transit towards the previous intersection northwards, per origin.
    pub links_north: Vec<VecDeque<f64>>,
    pub probes: Vec<ProbeVehicle>,
    pub ledger: VehicleLedger,
    pub bottleneck_congested: bool,
    pub incident_active: bool,
}

impl SimState {
    /// Vehicles currently inside the modelled system.
    pub fn stored_veh(&self) -> f64 {
        self.cell_veh.iter().sum::<f64>()
            + self.entrance_queue_veh
            + self.onramps.iter().flatten().map(|r| r.vehicles).sum::<f64>()
            + self.intersections.iter().map(IntersectionState::total_queued).sum::<f64>()
            + self.links_south.iter().chain(&self.links_north).flatten().sum::<f64>()
    }

    /// `entered - exited - stored`, zero up to rounding.
    pub fn conservation_error(&self) -> f64 {
        self.ledger.entered - self.ledger.exited - self.stored_veh()
    }
}

/// One row of the optional per-step trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time_s: f64,
    pub section: usize,
    pub density_veh_km: f64,
    pub inflow_veh_h: f64,
    pub outflow_veh_h: f64,
    pub onramp_veh_h: f64,
    pub offramp_veh_h: f64,
    pub ramp_queue_m: f64,
    pub speed_limit_kmh: f64,
}

#[derive(Clone, Debug)]
struct CellInfo {
    length_km: f64,
    start_km: f64,
    section: Option<usize>,
    fd: FundamentalDiagram,
}

#[derive(Clone, Debug)]
struct Layout {
    cells: Vec<CellInfo>,
    section_cells: Vec<Range<usize>>,
    merge_cell: Vec<Option<usize>>,
    onramp_of_intersection: Vec<Option<usize>>,
    link_delay_ticks: Vec<usize>,
    arterial_entrances: Vec<Option<(usize, Direction)>>,
}

impl Layout {
    fn build(net: &NetworkTopology, profile: &DemandProfile, dt_s: f64) -> Result<Self> {
        let first_fd = net
            .sections
            .first()
            .ok_or_else(|| Error::InvalidInput("network has no freeway sections".into()))?
            .fd;
        let mut cells = Vec::new();
        let mut x = 0.0;
        let mut push_cells = |len: f64, section: Option<usize>, fd: FundamentalDiagram, cells: &mut Vec<CellInfo>| {
            let n = ((len / net.cell_length_km).round() as usize).max(1);
            let l = len / n as f64;
            for _ in 0..n {
                cells.push(CellInfo { length_km: l, start_km: x, section, fd });
                x += l;
            }
            n
        };
        if net.upstream_zone_km > 0.0 {
            push_cells(net.upstream_zone_km, None, first_fd, &mut cells);
        }
        let mut section_cells = Vec::new();
        let mut merge_cell = Vec::new();
        for (i, s) in net.sections.iter().enumerate() {
            let start = cells.len();
            let n = push_cells(s.length_km, Some(i), s.fd, &mut cells);
            section_cells.push(start..start + n);
            merge_cell.push(s.onramp.as_ref().map(|_| start + n / 2));
        }
        let max_cell_speed = cells.iter().map(|c| c.fd.free_flow_speed_kmh / c.length_km).fold(0.0, f64::max);
        if max_cell_speed * dt_s / 3600.0 > 1.0 {
            return Err(Error::InvalidInput(format!("tick {dt_s} s too long for the cell length")));
        }
        let mut onramp_of_intersection = vec![None; net.intersections.len()];
        for (i, s) in net.sections.iter().enumerate() {
            if let Some(r) = &s.onramp {
                onramp_of_intersection[r.connecting_intersection] = Some(i);
            }
        }
        let speed_m_s = net.arterial_speed_kmh / 3.6;
        let link_delay_ticks = net
            .intersections
            .iter()
            .map(|ix| ((ix.link_length_m / speed_m_s / dt_s).round() as usize).max(1))
            .collect();
        let arterial_entrances = profile
            .entrances
            .iter()
            .map(|(loc, _)| match loc {
                EntranceLocation::Mainline => Ok(None),
                EntranceLocation::Arterial { intersection, direction } => {
                    if *intersection >= net.intersections.len() {
                        Err(Error::InvalidInput(format!("demand entrance at missing intersection {intersection}")))
                    } else {
                        Ok(Some((*intersection, *direction)))
                    }
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            cells,
            section_cells,
            merge_cell,
            onramp_of_intersection,
            link_delay_ticks,
            arterial_entrances,
        })
    }
}

/// Mesoscopic corridor simulator: cell-transmission freeway, point-queue ramps and
/// signalised arterial approaches, advanced in fixed ticks.
#[derive(Clone, Debug)]
pub struct Simulator {
    net: NetworkTopology,
    params: SimParams,
    layout: Layout,
    state: SimState,
    sampler: DemandSampler,
    rng: ChaCha8Rng,
    counters: Counters,
    finished: Vec<ProbeVehicle>,
    crossings: Vec<SectionCrossing>,
    trace: Vec<TraceRow>,
    mainline_discharged_veh: f64,
    arrivals: Vec<f64>,
}

impl Simulator {
    pub fn new(
        net: NetworkTopology,
        profile: &DemandProfile,
        params: SimParams,
        initial_plans: Vec<SignalPlan>,
        seed: u64,
    ) -> Result<Self> {
        if !(params.dt_s > 0.0) {
            return Err(Error::InvalidInput("tick must be positive".into()));
        }
        if let Some(w) = params.incident {
            if w.section >= net.sections.len() {
                return Err(Error::InvalidInput(format!("incident section {} does not exist", w.section + 1)));
            }
        }
        if initial_plans.len() != net.intersections.len() {
            return Err(Error::InvalidInput("one initial plan per intersection required".into()));
        }
        let layout = Layout::build(&net, profile, params.dt_s)?;
        let n = net.sections.len();
        let state = SimState {
            time_s: 0.0,
            tick: 0,
            cell_veh: vec![0.0; layout.cells.len()],
            sections: net
                .sections
                .iter()
                .map(|s| SectionState { speed_limit_kmh: s.fd.free_flow_speed_kmh, ..Default::default() })
                .collect(),
            entrance_queue_veh: 0.0,
            onramps: net
                .sections
                .iter()
                .map(|s| {
                    s.onramp.as_ref().map(|r| RampQueueState {
                        vehicles: 0.0,
                        storage_veh: r.storage_length_m / net.vehicle_spacing_m,
                        spacing_m: net.vehicle_spacing_m,
                        blocked_veh: 0.0,
                    })
                })
                .collect(),
            intersections: initial_plans.into_iter().map(|p| IntersectionState::new(p, 0.0)).collect(),
            links_south: layout.link_delay_ticks.iter().map(|&d| VecDeque::from(vec![0.0; d])).collect(),
            links_north: layout.link_delay_ticks.iter().map(|&d| VecDeque::from(vec![0.0; d])).collect(),
            probes: Vec::new(),
            ledger: VehicleLedger::default(),
            bottleneck_congested: false,
            incident_active: false,
        };
        let counters = Counters {
            section_in_veh: vec![0.0; n],
            section_out_veh: vec![0.0; n],
            onramp_veh: vec![0.0; n],
            offramp_veh: vec![0.0; n],
            onramp_arrivals_veh: vec![0.0; n],
            density_time: vec![0.0; n],
            vkt: vec![0.0; n],
            vht: vec![0.0; n],
            entrance_arrivals_veh: vec![0.0; profile.entrances.len()],
            mainline_entered_veh: 0.0,
        };
        Ok(Self {
            sampler: DemandSampler::new(profile, params.demand_refresh_s),
            arrivals: vec![0.0; profile.entrances.len()],
            net,
            params,
            layout,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counters,
            finished: Vec::new(),
            crossings: Vec::new(),
            trace: Vec::new(),
            mainline_discharged_veh: 0.0,
        })
    }

    pub fn network(&self) -> &NetworkTopology {
        &self.net
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn time_s(&self) -> f64 {
        self.state.time_s
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn demand_locations(&self) -> &[EntranceLocation] {
        self.sampler.locations()
    }

    /// Input rates (veh/h) currently configured at each entrance.
    pub fn demand_rates(&self) -> &[f64] {
        self.sampler.rates()
    }

    /// Section crossings completed so far, in completion order.
    pub fn crossings(&self) -> &[SectionCrossing] {
        &self.crossings
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    /// Probes that completed the corridor.
    pub fn finished_probes(&self) -> &[ProbeVehicle] {
        &self.finished
    }

    /// Finished probes followed by those still en route.
    pub fn all_probes(&self) -> impl Iterator<Item = &ProbeVehicle> {
        self.finished.iter().chain(&self.state.probes)
    }

    pub fn cell_count(&self) -> usize {
        self.layout.cells.len()
    }

    /// Mean density of the zone upstream of section 1 (0 when there is none).
    pub fn upstream_zone_density(&self) -> f64 {
        let (veh, km) = self
            .layout
            .cells
            .iter()
            .zip(&self.state.cell_veh)
            .filter(|(c, _)| c.section.is_none())
            .fold((0.0, 0.0), |(v, l), (c, n)| (v + n, l + c.length_km));
        if km > 0.0 {
            veh / km
        } else {
            0.0
        }
    }

    /// Advances the network by one tick.
    pub fn step(&mut self, controls: &ControlVector) -> Result<()> {
        controls.check(&self.net)?;
        let dt = self.params.dt_s;
        let h = dt / 3600.0;
        let t = self.state.time_s;
        let incident = self.params.incident.filter(|w| w.active_at(t));
        self.state.incident_active = incident.is_some();
        if incident.is_none() {
            self.state.bottleneck_congested = false;
        }

        // arrivals
        let probe_every = ((self.params.probe_headway_s / dt).round() as u64).max(1);
        if self.state.tick % probe_every == 0 {
            let mut p = ProbeVehicle::new(ProbeOrigin::Mainline, t);
            p.release_at_veh = self.mainline_discharged_veh + self.state.entrance_queue_veh;
            self.state.probes.push(p);
        }
        self.sampler.sample(t, dt, &mut self.rng, &mut self.arrivals);
        for (e, &a) in self.arrivals.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            self.state.ledger.entered += a;
            self.counters.entrance_arrivals_veh[e] += a;
            match self.layout.arterial_entrances[e] {
                None => {
                    self.state.entrance_queue_veh += a;
                    self.counters.mainline_entered_veh += a;
                }
                Some((k, dir)) => {
                    let y = self.net.intersections[k].turn_ratios.approach(dir);
                    self.state.intersections[k].approaches[dir.index()].add_split(a, y);
                }
            }
        }

        // freeway
        let m = self.layout.cells.len();
        let mut speed = vec![0.0; m];
        let zone_end = self.net.upstream_zone_km;
        for (c, cell) in self.layout.cells.iter().enumerate() {
            speed[c] = match cell.section {
                Some(i) => controls.speed_limits_kmh[i],
                None => {
                    let mid = cell.start_km + cell.length_km / 2.0;
                    if zone_end - mid < controls.upstream_zone_km {
                        controls.upstream_limit_kmh
                    } else {
                        cell.fd.free_flow_speed_kmh
                    }
                }
            };
        }
        let density: Vec<f64> =
            self.layout.cells.iter().zip(&self.state.cell_veh).map(|(c, n)| n / c.length_km).collect();
        let demand: Vec<f64> =
            (0..m).map(|c| self.layout.cells[c].fd.demand(density[c], speed[c])).collect();
        let supply: Vec<f64> =
            (0..m).map(|c| self.layout.cells[c].fd.supply(density[c], speed[c])).collect();

        let bottleneck_cell = incident.map(|w| self.layout.section_cells[w.section].end - 1);
        let bottleneck_cap = incident.map(|w| {
            bottleneck_capacity(
                &self.net.sections[w.section],
                1,
                self.state.bottleneck_congested,
                controls.lc_lane_drop,
                self.params.lc_capacity_drop,
            )
        });

        let mut out = vec![0.0; m];
        let mut inflow = vec![0.0; m];
        let mut ramp_in = vec![0.0; self.net.sections.len()];
        let mut off_out = vec![0.0; self.net.sections.len()];
        let mut last_out = 0.0;
        for c in 0..=m {
            let mut du = if c == 0 {
                (self.state.entrance_queue_veh / h).min(self.layout.cells[0].fd.capacity_veh_h)
            } else {
                demand[c - 1]
            };
            if c > 0 && Some(c - 1) == bottleneck_cell {
                du = du.min(bottleneck_cap.unwrap_or(f64::INFINITY));
            }
            if c == m {
                last_out = du;
                out[m - 1] = du;
                break;
            }
            let section = self.layout.cells[c].section;
            let first_of_section = section.filter(|&i| self.layout.section_cells[i].start == c);
            let beta = first_of_section
                .and_then(|i| self.net.sections[i].offramp.as_ref())
                .map_or(0.0, |r| r.exit_ratio);
            let merge_section = section.filter(|&i| self.layout.merge_cell[i] == Some(c));
            let dr = merge_section.map_or(0.0, |i| {
                let q = self.state.onramps[i].map_or(0.0, |r| r.vehicles);
                let rate = metering_rate(controls.red_s[i]).unwrap_or(f64::INFINITY);
                (q / h).min(rate)
            });
            let mut sd = supply[c];
            if merge_section.is_some_and(|i| controls.lc_merge[i]) {
                sd *= 1.0 + self.params.lc_merge_boost;
            }
            // never overfill the cell
            let space = (self.layout.cells[c].fd.jam_density_veh_km * self.layout.cells[c].length_km
                - self.state.cell_veh[c])
                .max(0.0)
                / h;
            sd = sd.min(space);

            if beta > 0.0 {
                du = du.min(self.params.offramp_capacity_veh_h / beta);
            }
            let dm = du * (1.0 - beta);
            let (main, ramp) = if dm + dr <= sd {
                (dm, dr)
            } else if dr > 0.0 {
                let p = self.params.onramp_merge_share;
                let ramp = median(dr, sd - dm, p * sd);
                let main = median(dm, sd - dr, (1.0 - p) * sd);
                (main.max(0.0), ramp.max(0.0))
            } else {
                (sd, 0.0)
            };
            let total = if beta > 0.0 { main / (1.0 - beta) } else { main };
            let off = total - main;
            if c == 0 {
                self.state.entrance_queue_veh = (self.state.entrance_queue_veh - total * h).max(0.0);
                self.mainline_discharged_veh += total * h;
            } else {
                out[c - 1] = total;
            }
            inflow[c] = main + ramp;
            if let Some(i) = merge_section {
                ramp_in[i] = ramp;
            }
            if let Some(i) = first_of_section {
                off_out[i] = off;
            }
        }

        // apply
        for c in 0..m {
            self.state.cell_veh[c] = (self.state.cell_veh[c] + (inflow[c] - out[c]) * h).max(0.0);
        }
        self.state.ledger.exited += last_out * h;
        for (i, s) in self.net.sections.iter().enumerate() {
            if let Some(r) = self.state.onramps[i].as_mut() {
                r.vehicles = (r.vehicles - ramp_in[i] * h).max(0.0);
            }
            if let Some(off) = &s.offramp {
                let k = off.connecting_intersection;
                let y = self.net.intersections[k].turn_ratios.approach(Direction::West);
                self.state.intersections[k].approaches[Direction::West.index()].add_split(off_out[i] * h, y);
            }
        }

        self.step_arterial(controls, t, dt);

        // probes
        let spans: Vec<CellSpan> = (0..m)
            .map(|c| {
                let cell = &self.layout.cells[c];
                let u = if density[c] > 1e-9 { speed[c].min(out[c] / density[c]) } else { speed[c] };
                CellSpan { start_km: cell.start_km, end_km: cell.start_km + cell.length_km, speed_kmh: u, section: cell.section }
            })
            .collect();
        let released = self.mainline_discharged_veh;
        let mut k = 0;
        while k < self.state.probes.len() {
            let p = &mut self.state.probes[k];
            let was_queued = p.position_km.is_none();
            let before = p.crossings.len();
            advance_probe(p, &spans, t, dt);
            if was_queued && released + 1e-9 >= p.release_at_veh {
                p.position_km = Some(0.0);
                p.cell = 0;
                p.section_enter_s = spans[0].section.map(|s| (s, t + dt));
            }
            self.crossings.extend_from_slice(&p.crossings[before..]);
            if p.t_out_s.is_some() {
                let done = self.state.probes.swap_remove(k);
                self.finished.push(done);
            } else {
                k += 1;
            }
        }

        // section aggregates
        for (i, range) in self.layout.section_cells.iter().enumerate() {
            let len = self.net.sections[i].length_km;
            let veh: f64 = self.state.cell_veh[range.clone()].iter().sum();
            let first = range.start;
            let last = range.end - 1;
            let q_in = if first == 0 { 0.0 } else { out[first - 1] };
            let q_out = out[last];
            let st = &mut self.state.sections[i];
            st.density_veh_km = veh / len;
            st.inflow_veh_h = q_in;
            st.outflow_veh_h = q_out;
            st.onramp_veh_h = ramp_in[i];
            st.offramp_veh_h = off_out[i];
            st.speed_limit_kmh = controls.speed_limits_kmh[i];
            st.closed_lanes = u32::from(incident.is_some_and(|w| w.section == i));
            self.counters.section_in_veh[i] += q_in * h;
            self.counters.section_out_veh[i] += q_out * h;
            self.counters.onramp_veh[i] += ramp_in[i] * h;
            self.counters.offramp_veh[i] += off_out[i] * h;
            self.counters.density_time[i] += st.density_veh_km * dt;
            for c in range.clone() {
                self.counters.vkt[i] += spans[c].speed_kmh * density[c] * self.layout.cells[c].length_km * h;
                self.counters.vht[i] += density[c] * self.layout.cells[c].length_km * h;
            }
        }
        if self.layout.section_cells.first().is_some_and(|r| r.start == 0) {
            // no upstream zone: the first section is fed straight from the entrance
            let f = inflow[0];
            self.state.sections[0].inflow_veh_h = f;
            self.counters.section_in_veh[0] += f * h;
        }
        if let (Some(w), Some(c)) = (incident, bottleneck_cell) {
            let fd = &self.net.sections[w.section].fd;
            let rho = self.state.cell_veh[c] / self.layout.cells[c].length_km;
            self.state.bottleneck_congested = rho > fd.critical_density_under_limit(speed[c]);
        }

        self.state.tick += 1;
        self.state.time_s = self.state.tick as f64 * dt;
        if self.params.trace {
            for (i, st) in self.state.sections.iter().enumerate() {
                self.trace.push(TraceRow {
                    time_s: self.state.time_s,
                    section: i,
                    density_veh_km: st.density_veh_km,
                    inflow_veh_h: st.inflow_veh_h,
                    outflow_veh_h: st.outflow_veh_h,
                    onramp_veh_h: st.onramp_veh_h,
                    offramp_veh_h: st.offramp_veh_h,
                    ramp_queue_m: self.state.onramps[i].map_or(0.0, |r| r.queue_m()),
                    speed_limit_kmh: st.speed_limit_kmh,
                });
            }
        }
        Ok(())
    }

    fn step_arterial(&mut self, controls: &ControlVector, t: f64, dt: f64) {
        let kk = self.net.intersections.len();
        // link arrivals first so nothing hops two intersections in one tick
        for k in 0..kk {
            let south = self.state.links_south[k].pop_front().unwrap_or(0.0);
            if south > 0.0 && k + 1 < kk {
                let y = self.net.intersections[k + 1].turn_ratios.approach(Direction::South);
                self.state.intersections[k + 1].approaches[Direction::South.index()].add_split(south, y);
            }
            let north = self.state.links_north[k].pop_front().unwrap_or(0.0);
            if north > 0.0 && k > 0 {
                let y = self.net.intersections[k - 1].turn_ratios.approach(Direction::North);
                self.state.intersections[k - 1].approaches[Direction::North.index()].add_split(north, y);
            }
        }
        let phi = self.net.onramp_share;
        for k in 0..kk {
            let ix = &self.net.intersections[k];
            let st = &mut self.state.intersections[k];
            st.roll_cycle(t, &controls.plans[k]);
            let cap = st.discharge_capacity(ix, t, dt);
            let mut served = [[0.0; 3]; 4];
            let mut east_total = 0.0;
            for dir in Direction::ALL {
                for mov in Movement::ALL {
                    let s = st.approaches[dir.index()].queued_veh[mov.index()].min(cap[dir.index()][mov.index()]);
                    served[dir.index()][mov.index()] = s;
                    if dir.after(mov) == Direction::East {
                        east_total += s;
                    }
                }
            }
            let ramp = self.layout.onramp_of_intersection[k];
            let mut east_scale = 1.0;
            if let Some(i) = ramp {
                if let Some(r) = &self.state.onramps[i] {
                    let need = phi * east_total;
                    if need > r.space_veh() {
                        east_scale = r.space_veh() / need;
                    }
                }
            }
            let mut to_south = 0.0;
            let mut to_north = 0.0;
            let mut to_ramp = 0.0;
            let mut exits = 0.0;
            for dir in Direction::ALL {
                for mov in Movement::ALL {
                    let heading = dir.after(mov);
                    let mut s = served[dir.index()][mov.index()];
                    if heading == Direction::East {
                        s *= east_scale;
                    }
                    st.approaches[dir.index()].queued_veh[mov.index()] -= s;
                    match heading {
                        Direction::South if k + 1 < kk => to_south += s,
                        Direction::North if k > 0 => to_north += s,
                        Direction::East if ramp.is_some() => {
                            to_ramp += phi * s;
                            exits += (1.0 - phi) * s;
                        }
                        _ => exits += s,
                    }
                }
            }
            if east_scale < 1.0 {
                if let Some(r) = ramp.and_then(|i| self.state.onramps[i].as_mut()) {
                    r.blocked_veh += (1.0 - east_scale) * east_total;
                }
            }
            self.state.links_south[k].push_back(to_south);
            self.state.links_north[k].push_back(to_north);
            if let Some(i) = ramp {
                if let Some(r) = self.state.onramps[i].as_mut() {
                    r.vehicles += to_ramp;
                }
                self.counters.onramp_arrivals_veh[i] += to_ramp;
            }
            self.state.ledger.exited += exits;
        }
    }
}

fn median(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(a.min(b).max(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{EntranceDemand, FundamentalDiagram};

    fn plans(net: &NetworkTopology) -> Vec<SignalPlan> {
        vec![SignalPlan::uniform(60.0, 16.0); net.intersections.len()]
    }

    fn bare_section() -> NetworkTopology {
        let mut net = NetworkTopology::single_section(FundamentalDiagram::default());
        net.upstream_zone_km = 0.0;
        net.sections[0].onramp = None;
        net.sections[0].offramp = None;
        net
    }

    fn mainline_only(mean: f64) -> DemandProfile {
        DemandProfile {
            entrances: vec![(EntranceLocation::Mainline, EntranceDemand { mean_veh_h: mean, std_veh_h: 0.0 })],
            level_multiplier: 1.0,
        }
    }

    #[test]
    fn median_rule() {
        assert_eq!(median(1.0, 2.0, 3.0), 2.0);
        assert_eq!(median(3.0, 1.0, 2.0), 2.0);
        assert_eq!(median(2.0, 3.0, 1.0), 2.0);
    }

    #[test]
    fn empty_network_stays_empty() {
        let net = NetworkTopology::single_section(FundamentalDiagram::default());
        let profile = DemandProfile::for_network(&net, 0.0, 0.0, 0.1, 1.0);
        let mut sim = Simulator::new(net.clone(), &profile, SimParams::default(), plans(&net), 1).unwrap();
        let c = ControlVector::inactive(&net, plans(&net));
        for _ in 0..600 {
            sim.step(&c).unwrap();
        }
        assert!(sim.state().cell_veh.iter().all(|v| *v == 0.0));
        assert_eq!(sim.state().stored_veh(), 0.0);
    }

    #[test]
    fn control_vector_must_cover_network() {
        let net = NetworkTopology::single_section(FundamentalDiagram::default());
        let profile = DemandProfile::for_network(&net, 0.0, 0.0, 0.1, 1.0);
        let mut sim = Simulator::new(net.clone(), &profile, SimParams::default(), plans(&net), 1).unwrap();
        let mut c = ControlVector::inactive(&net, plans(&net));
        c.speed_limits_kmh.clear();
        assert!(sim.step(&c).is_err());
        let mut c = ControlVector::inactive(&net, plans(&net));
        c.plans.clear();
        assert!(sim.step(&c).is_err());
    }

    #[test]
    fn critical_equilibrium_holds() {
        let net = bare_section();
        let profile = mainline_only(0.0);
        let mut sim = Simulator::new(net.clone(), &profile, SimParams::default(), plans(&net), 1).unwrap();
        for v in sim.state.cell_veh.iter_mut() {
            *v = 100.0 * 0.4;
        }
        let c = ControlVector::inactive(&net, plans(&net));
        for _ in 0..300 {
            // constant inflow at capacity
            sim.state.entrance_queue_veh = 10_000.0 / 3600.0;
            sim.state.ledger.entered += 10_000.0 / 3600.0;
            sim.step(&c).unwrap();
            sim.state.entrance_queue_veh = 0.0;
        }
        assert!((sim.state().sections[0].density_veh_km - 100.0).abs() < 1e-6);
    }

    #[test]
    fn incident_congests_and_drops_capacity() {
        let net = bare_section();
        let profile = mainline_only(9000.0);
        let params = SimParams {
            incident: Some(IncidentWindow { section: 0, start_s: 0.0, clear_s: 1e9 }),
            ..SimParams::default()
        };
        let mut sim = Simulator::new(net.clone(), &profile, params, plans(&net), 3).unwrap();
        let c = ControlVector::inactive(&net, plans(&net));
        for _ in 0..900 {
            sim.step(&c).unwrap();
        }
        let st = sim.state();
        assert!(st.bottleneck_congested);
        assert!(st.sections[0].density_veh_km > 100.0);
        assert!((st.sections[0].outflow_veh_h - 6800.0).abs() < 1e-6);
    }
}
