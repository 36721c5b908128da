use serde::{Deserialize, Serialize};

/// Speed below which a moving probe counts a stop (km/h).
pub const STOP_BELOW_KMH: f64 = 5.0;
/// Speed a probe must exceed before another stop can be counted (km/h).
pub const MOVING_ABOVE_KMH: f64 = 10.0;

/// Emission proxy per km travelled at `v` km/h: `90 + 5000/v + 0.012 v^2` g/km.
pub fn emission_g_per_km(speed_kmh: f64) -> f64 {
    90.0 + 5000.0 / speed_kmh + 0.012 * speed_kmh * speed_kmh
}

/// The same proxy per hour of driving, finite at standstill (idling 5000 g/h).
pub fn emission_g_per_h(speed_kmh: f64) -> f64 {
    90.0 * speed_kmh + 5000.0 + 0.012 * speed_kmh.powi(3)
}

/// Fuel proxy: emissions divided by 14.
pub const FUEL_PER_EMISSION: f64 = 1.0 / 14.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeOrigin {
    Mainline,
    Onramp(usize),
}

/// Completed crossing of one freeway section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionCrossing {
    pub section: usize,
    pub enter_s: f64,
    pub exit_s: f64,
}

/// Virtual vehicle tracing the local space-mean speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeVehicle {
    pub origin: ProbeOrigin,
    /// Arrival time at the network boundary, before any entrance queueing.
    pub t_in_s: f64,
    pub t_out_s: Option<f64>,
    /// Distance from the upstream end of the corridor (km); `None` while queued.
    pub position_km: Option<f64>,
    pub speed_kmh: f64,
    pub stops: u32,
    pub distance_km: f64,
    pub emission_g: f64,
    pub crossings: Vec<SectionCrossing>,
    pub(crate) moving: bool,
    pub(crate) cell: usize,
    pub(crate) section_enter_s: Option<(usize, f64)>,
    /// Cumulative entrance discharge after which the probe leaves the queue.
    pub(crate) release_at_veh: f64,
}

impl ProbeVehicle {
    pub fn new(origin: ProbeOrigin, t_in_s: f64) -> Self {
        Self {
            origin,
            t_in_s,
            t_out_s: None,
            position_km: None,
            speed_kmh: 0.0,
            stops: 0,
            distance_km: 0.0,
            emission_g: 0.0,
            crossings: Vec::new(),
            moving: false,
            cell: 0,
            section_enter_s: None,
            release_at_veh: 0.0,
        }
    }

    pub fn travel_time_s(&self) -> Option<f64> {
        self.t_out_s.map(|t| t - self.t_in_s)
    }

    pub fn is_mainline(&self) -> bool {
        self.origin == ProbeOrigin::Mainline
    }

    pub fn fuel_g(&self) -> f64 {
        self.emission_g * FUEL_PER_EMISSION
    }

    fn observe_speed(&mut self, speed_kmh: f64) {
        self.speed_kmh = speed_kmh;
        if speed_kmh > MOVING_ABOVE_KMH {
            self.moving = true;
        } else if self.moving && speed_kmh < STOP_BELOW_KMH {
            self.stops += 1;
            self.moving = false;
        }
    }
}

/// Kinematic view of one cell for probe advancement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellSpan {
    pub start_km: f64,
    pub end_km: f64,
    pub speed_kmh: f64,
    pub section: Option<usize>,
}

/// Moves an active probe through `[t, t + dt)` at the piecewise-constant cell
/// speeds, recording section crossings, stops and emissions.
pub fn advance_probe(probe: &mut ProbeVehicle, cells: &[CellSpan], t_s: f64, dt_s: f64) {
    let Some(mut x) = probe.position_km else {
        probe.emission_g += emission_g_per_h(0.0) * dt_s / 3600.0;
        return;
    };
    if probe.t_out_s.is_some() {
        return;
    }
    let mut remaining = dt_s;
    let mut last_speed;
    loop {
        let cell = cells[probe.cell];
        let u = cell.speed_kmh.max(0.0);
        last_speed = u;
        let to_end_s = if u > 0.0 { (cell.end_km - x) / u * 3600.0 } else { f64::INFINITY };
        if to_end_s > remaining {
            let d = u * remaining / 3600.0;
            x += d;
            probe.distance_km += d;
            probe.emission_g += emission_g_per_h(u) * remaining / 3600.0;
            break;
        }
        probe.distance_km += cell.end_km - x;
        probe.emission_g += emission_g_per_h(u) * to_end_s / 3600.0;
        remaining -= to_end_s;
        x = cell.end_km;
        let now = t_s + dt_s - remaining;
        let next = probe.cell + 1;
        let next_section = cells.get(next).and_then(|c| c.section);
        if cell.section != next_section {
            if let (Some(s), Some((cur, enter))) = (cell.section, probe.section_enter_s) {
                if s == cur {
                    probe.crossings.push(SectionCrossing { section: s, enter_s: enter, exit_s: now });
                }
            }
            probe.section_enter_s = next_section.map(|s| (s, now));
        }
        if next >= cells.len() {
            probe.t_out_s = Some(now);
            probe.position_km = Some(x);
            probe.observe_speed(u);
            return;
        }
        probe.cell = next;
    }
    probe.position_km = Some(x);
    probe.observe_speed(last_speed);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(speeds: &[(f64, f64, Option<usize>)]) -> Vec<CellSpan> {
        let mut start = 0.0;
        speeds
            .iter()
            .map(|&(len, v, s)| {
                let c = CellSpan { start_km: start, end_km: start + len, speed_kmh: v, section: s };
                start += len;
                c
            })
            .collect()
    }

    fn run(cells: &[CellSpan]) -> ProbeVehicle {
        let mut p = ProbeVehicle::new(ProbeOrigin::Mainline, 0.0);
        p.position_km = Some(0.0);
        p.section_enter_s = cells[0].section.map(|s| (s, 0.0));
        let mut t = 0.0;
        while p.t_out_s.is_none() && t < 1e5 {
            advance_probe(&mut p, cells, t, 1.0);
            t += 1.0;
        }
        p
    }

    #[test]
    fn free_flow_corridor() {
        let cells = spans(&vec![(0.4, 100.0, Some(0)); 40]);
        let p = run(&cells);
        assert!((p.travel_time_s().unwrap() / 60.0 - 9.6).abs() < 1e-9);
        assert_eq!(p.stops, 0);
        assert!((p.emission_g / p.distance_km - 260.0).abs() < 1e-9);
    }

    #[test]
    fn two_speed_toy() {
        let cells = spans(&[(1.6, 100.0, Some(0)), (1.6, 20.0, Some(1))]);
        let p = run(&cells);
        assert!((p.travel_time_s().unwrap() / 60.0 - 5.76).abs() < 1e-9);
        assert_eq!(p.crossings.len(), 2);
        assert!((p.crossings[0].exit_s - 57.6).abs() < 1e-9);
        assert!((p.crossings[1].exit_s - p.crossings[1].enter_s - 288.0).abs() < 1e-9);
    }

    #[test]
    fn standing_queue_counts_a_stop() {
        let mut cells = spans(&[(1.0, 100.0, Some(0)), (0.4, 100.0, Some(0)), (1.0, 100.0, Some(0))]);
        let mut p = ProbeVehicle::new(ProbeOrigin::Mainline, 0.0);
        p.position_km = Some(0.0);
        for i in 0..200 {
            cells[1].speed_kmh = if (40..100).contains(&i) { 0.0 } else { 100.0 };
            advance_probe(&mut p, &cells, i as f64, 1.0);
        }
        assert!(p.stops >= 1);
        assert!(p.t_out_s.is_some());
    }

    #[test]
    fn emission_minimum() {
        let v_star = (5000.0f64 / 0.024).cbrt();
        assert!((v_star - 59.28).abs() < 0.01);
        assert!(emission_g_per_km(v_star) < emission_g_per_km(v_star - 1.0));
        assert!(emission_g_per_km(v_star) < emission_g_per_km(v_star + 1.0));
    }
}
