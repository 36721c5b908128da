use serde::{Deserialize, Serialize};

use super::metrics::{DensitySample, ProbeWindow, QueueAccumulator, RunMetrics};
use super::policy::{Policy, SectionObservation, Strategy};
use super::signals::{SignalMode, SignalRunner};
use crate::baselines::{no_control, occupancy};
use crate::ftc::{
    compute_reward, desired_density, fallback_travel_time_min, upstream_vsl_command, upstream_vsl_location,
    FtcRawState, RewardParams, UpstreamMode,
};
use crate::mesosim::{bottleneck_capacity, ControlVector, Counters, SimParams, Simulator};
use crate::netmodel::{Direction, NetworkTopology, ScenarioConfig};
use crate::tsc::dominant_phase;
use crate::Result;

/// Floor on the desired density so the reward stays defined in an empty section.
pub const MIN_DESIRED_DENSITY_VEH_KM: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Extra simulated time after the horizon for late probes to finish (0: none).
    pub drain_cap_s: f64,
    /// Speed-limit zone upstream of section 1 while a lane is closed. Only the
    /// coordinated strategy uses it.
    pub upstream_vsl: bool,
    pub signal_mode: SignalMode,
    pub record_density: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { drain_cap_s: 1800.0, upstream_vsl: true, signal_mode: SignalMode::Responsive, record_density: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    /// Vehicles entered minus exited minus stored at the end of the run.
    pub conservation_error_veh: f64,
    /// Highest section density seen at a control boundary over the jam density.
    pub peak_density_ratio: f64,
    pub control_cycles: usize,
}

#[derive(Clone, Debug)]
struct Snapshot {
    time_s: f64,
    counters: Counters,
    crossings: usize,
}

impl Snapshot {
    fn take(sim: &Simulator) -> Self {
        Self { time_s: sim.time_s(), counters: sim.counters().clone(), crossings: sim.crossings().len() }
    }
}

/// Runs one scenario under `policy` from an empty network until the horizon (plus
/// drain), applying controls once per control cycle.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    net: &NetworkTopology,
    policy: &mut Policy<'_>,
    opts: &RunOptions,
    seed: u64,
) -> Result<RunOutput> {
    let profile = cfg.build_demand(net);
    let params = SimParams::from_scenario(cfg);
    let incident = params.incident;
    let mut signals = SignalRunner::new(cfg, net, &profile, opts.signal_mode)?;
    let mut sim = Simulator::new(net.clone(), &profile, params, signals.plans().to_vec(), seed)?;
    let n = net.sections.len();
    let ticks = cfg.control_ticks().max(1);
    let dt = cfg.tick_s;
    let window = ProbeWindow { after_s: cfg.warmup_s, until_s: cfg.duration_s };
    let ramps: Vec<usize> = (0..n).filter(|&i| net.sections[i].onramp.is_some()).collect();
    let mut ramp_acc = QueueAccumulator::new(ramps.len());
    let mut approach_acc = QueueAccumulator::new(4 * net.intersections.len());
    let mut density = Vec::new();
    let mut controls = vec![no_control(); n];
    let mut last = Snapshot::take(&sim);
    let mut zone_km: f64 = 0.0;
    let mut cycles = 0;
    let mut peak_ratio: f64 = 0.0;
    let eps = 1e-9;

    loop {
        let t = sim.time_s();
        if t >= cfg.duration_s - eps {
            let pending = sim.state().probes.iter().any(|p| p.is_mainline() && window.contains(p.t_in_s));
            if !pending || t >= cfg.duration_s + opts.drain_cap_s - eps {
                break;
            }
        }
        for (st, sec) in sim.state().sections.iter().zip(&net.sections) {
            peak_ratio = peak_ratio.max(st.density_veh_km / sec.fd.jam_density_veh_km);
        }
        signals.update(&sim)?;
        let obs = observe(cfg, net, &sim, &last, &signals, cycles == 0)?;
        if opts.record_density && cycles > 0 && t <= cfg.duration_s + eps {
            for (i, o) in obs.iter().enumerate() {
                density.push(DensitySample {
                    time_s: t,
                    section: i + 1,
                    density: o.raw.density_veh_km,
                    rho_star: o.desired_density_veh_km,
                });
            }
        }
        controls = policy.act(&obs, &controls)?;
        let ramp_outflow_veh_h = incident.map_or(0.0, |w| ramp_outflow(&sim, &last, w.section));
        last = Snapshot::take(&sim);

        let mut cv = ControlVector::inactive(net, signals.plans().to_vec());
        let closure = incident.filter(|w| w.active_at(t));
        for (i, c) in controls.iter().enumerate() {
            cv.speed_limits_kmh[i] = c.speed_limit_kmh;
            cv.red_s[i] = c.red_s;
            cv.lc_merge[i] = c.lc && net.sections[i].onramp.is_some();
        }
        if let Some(w) = closure {
            cv.lc_lane_drop = policy.strategy() != Strategy::None;
            if opts.upstream_vsl && policy.strategy() == Strategy::QlCoordinated {
                if let Some((v0, bound)) = upstream_zone(&sim, net, w.section, ramp_outflow_veh_h, cv.lc_lane_drop) {
                    zone_km = zone_km.max(bound.min(net.upstream_zone_km));
                    cv.upstream_limit_kmh = v0;
                    cv.upstream_zone_km = zone_km;
                }
            }
        } else {
            zone_km = 0.0;
        }

        for _ in 0..ticks {
            sim.step(&cv)?;
            let now = sim.time_s();
            if now > cfg.warmup_s + eps && now <= cfg.duration_s + eps {
                let st = sim.state();
                ramp_acc.add(ramps.iter().map(|&i| st.onramps[i].as_ref().map_or(0.0, |r| r.queue_m())), dt);
                approach_acc.add(
                    st.intersections.iter().zip(&net.intersections).flat_map(|(s, ix)| {
                        Direction::ALL.into_iter().map(move |d| s.queue_m(ix, d, net.vehicle_spacing_m))
                    }),
                    dt,
                );
            }
        }
        cycles += 1;
    }

    let metrics = RunMetrics::from_parts(
        sim.finished_probes(),
        &window,
        &ramp_acc.time_means(),
        &approach_acc.time_means(),
        density,
    );
    Ok(RunOutput {
        metrics,
        conservation_error_veh: sim.state().conservation_error(),
        peak_density_ratio: peak_ratio,
        control_cycles: cycles,
    })
}

/// Off-ramp minus on-ramp flow (veh/h) between section 1 and the downstream end of
/// `section` over the last cycle.
fn ramp_outflow(sim: &Simulator, last: &Snapshot, section: usize) -> f64 {
    let span = sim.time_s() - last.time_s;
    if span <= 0.0 {
        return 0.0;
    }
    let (now, before) = (sim.counters(), &last.counters);
    (0..=section)
        .map(|i| (now.offramp_veh[i] - before.offramp_veh[i]) - (now.onramp_veh[i] - before.onramp_veh[i]))
        .sum::<f64>()
        * 3600.0
        / span
}

/// Speed limit and minimal length of the zone upstream of section 1 that admits
/// what the closure can discharge. The admission target is the closure capacity
/// plus the net ramp outflow in between, and the capacity drop is the one in force
/// (reduced while lane-change advisories run). `None` when no limit is needed.
fn upstream_zone(
    sim: &Simulator,
    net: &NetworkTopology,
    section: usize,
    ramp_outflow_veh_h: f64,
    lc_active: bool,
) -> Option<(f64, f64)> {
    let s = &net.sections[section];
    let mut fd = s.fd;
    if lc_active {
        fd.capacity_drop = sim.params().lc_capacity_drop;
    }
    let target = bottleneck_capacity(s, 1, false, false, 0.0) + ramp_outflow_veh_h.max(0.0);
    if target >= fd.capacity_veh_h {
        return None;
    }
    let mode =
        if sim.state().bottleneck_congested { UpstreamMode::BottleneckWithDrop } else { UpstreamMode::Bottleneck };
    let v0 = upstream_vsl_command(mode, &fd, target).ok()?;
    if v0 >= fd.free_flow_speed_kmh {
        return None;
    }
    let n = section + 1;
    let mean = sim.state().sections[..n].iter().map(|x| x.density_veh_km).sum::<f64>() / n as f64;
    let bound = upstream_vsl_location(
        mean,
        sim.upstream_zone_density(),
        net.distance_to_section_end_km(section),
        v0,
        &fd,
        target,
    )
    .unwrap_or(net.upstream_zone_km);
    Some((v0, bound))
}

/// Per-section observations and last-cycle rewards at a control boundary.
fn observe(
    cfg: &ScenarioConfig,
    net: &NetworkTopology,
    sim: &Simulator,
    last: &Snapshot,
    signals: &SignalRunner,
    first: bool,
) -> Result<Vec<SectionObservation>> {
    let t = sim.time_s();
    let span_s = t - last.time_s;
    let per_h = if span_s > 0.0 { 3600.0 / span_s } else { 0.0 };
    let now = sim.counters();
    let before = &last.counters;
    let incident = sim.params().incident;
    let plans = signals.plans();
    let estimates = signals.estimates();
    let new_crossings = &sim.crossings()[last.crossings..];
    let st = sim.state();
    let mut out = Vec::with_capacity(net.sections.len());
    for (i, s) in net.sections.iter().enumerate() {
        let d = |a: &[f64], b: &[f64]| a[i] - b[i];
        let density = if span_s > 0.0 {
            d(&now.density_time, &before.density_time) / span_s
        } else {
            st.sections[i].density_veh_km
        };
        let inflow = d(&now.section_in_veh, &before.section_in_veh);
        let outflow = d(&now.section_out_veh, &before.section_out_veh);
        let on = d(&now.onramp_veh, &before.onramp_veh);
        let off = d(&now.offramp_veh, &before.offramp_veh);
        let arrivals = d(&now.onramp_arrivals_veh, &before.onramp_arrivals_veh);
        let queue_m = st.onramps[i].as_ref().map_or(0.0, |r| r.queue_m());
        let closed_now = incident.is_some_and(|w| w.section == i && w.active_at(t));
        let closed_last = incident.is_some_and(|w| w.section == i && w.active_at(last.time_s));
        let (phase, est) = match s.paired_intersection {
            Some(k) => (dominant_phase(&plans[k]), estimates[k]),
            None => (0, Default::default()),
        };
        let raw = FtcRawState {
            density_veh_km: density,
            net_inflow_veh_h: (inflow - outflow + on - off) * per_h,
            onramp_queue_m: queue_m,
            closed_lanes: u8::from(closed_now),
            dominant_phase: phase,
            demand_east_veh_h: est.east,
            demand_south_veh_h: est.south,
            demand_west_veh_h: est.west,
            demand_north_veh_h: est.north,
        };
        let cap = bottleneck_capacity(s, u32::from(closed_last), false, false, 0.0);
        let vf = s.fd.free_flow_speed_kmh;
        let rho_star =
            desired_density((inflow - off + arrivals) * per_h, cap, vf).max(MIN_DESIRED_DENSITY_VEH_KM);
        let reward = (!first && span_s > 0.0).then(|| {
            let times: Vec<f64> =
                new_crossings.iter().filter(|c| c.section == i).map(|c| (c.exit_s - c.enter_s) / 60.0).collect();
            let tt = if times.is_empty() {
                let vkt = d(&now.vkt, &before.vkt);
                let vht = d(&now.vht, &before.vht);
                fallback_travel_time_min(s.length_km, if vht > 0.0 { vkt / vht } else { 0.0 }, vf)
            } else {
                times.iter().sum::<f64>() / times.len() as f64
            };
            let p = RewardParams {
                reference_queue_m: cfg.agent.reference_queue_m,
                desired_density_veh_km: rho_star,
                section_length_km: s.length_km,
                free_flow_speed_kmh: vf,
            };
            compute_reward(tt.max(1e-9), queue_m, density, &p)
        });
        out.push(SectionObservation {
            raw,
            reward,
            desired_density_veh_km: rho_star,
            occupancy: occupancy(density, s.lane_count, net.vehicle_spacing_m),
            has_onramp: s.onramp.is_some(),
        });
    }
    Ok(out)
}
