use serde::{Deserialize, Serialize};

use crate::mesosim::{ProbeVehicle, FUEL_PER_EMISSION};

/// Probes count towards the metrics when they entered in `(after_s, until_s]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeWindow {
    pub after_s: f64,
    pub until_s: f64,
}

impl ProbeWindow {
    pub fn contains(&self, t_in_s: f64) -> bool {
        t_in_s > self.after_s && t_in_s <= self.until_s
    }
}

/// Completed mainline probes that entered inside the window.
pub fn qualifying_probes<'a>(
    probes: &'a [ProbeVehicle],
    window: &'a ProbeWindow,
) -> impl Iterator<Item = &'a ProbeVehicle> + 'a {
    probes.iter().filter(|p| p.is_mainline() && p.t_out_s.is_some() && window.contains(p.t_in_s))
}

/// Mean corridor travel time in minutes; `None` without any qualifying probe.
pub fn travel_time(probes: &[ProbeVehicle], window: &ProbeWindow) -> Option<f64> {
    mean(qualifying_probes(probes, window).filter_map(|p| p.travel_time_s()).map(|s| s / 60.0))
}

pub fn mean_stops(probes: &[ProbeVehicle], window: &ProbeWindow) -> Option<f64> {
    mean(qualifying_probes(probes, window).map(|p| f64::from(p.stops)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionSummary {
    /// Total emissions over total distance, g/veh/km.
    pub emission_g_km: f64,
    pub fuel_g_km: f64,
}

pub fn emission_rate(probes: &[ProbeVehicle], window: &ProbeWindow) -> Option<EmissionSummary> {
    let (e, d) =
        qualifying_probes(probes, window).fold((0.0, 0.0), |(e, d), p| (e + p.emission_g, d + p.distance_km));
    (d > 0.0).then(|| EmissionSummary { emission_g_km: e / d, fuel_g_km: e / d * FUEL_PER_EMISSION })
}

/// Mean of per-ramp time-mean queues (m).
pub fn onramp_queue_metric(time_means_m: &[f64]) -> f64 {
    mean(time_means_m.iter().copied()).unwrap_or(0.0)
}

/// Time-mean approach queues summed and divided by the approach count (4K).
pub fn arterial_queue_metric(time_means_m: &[f64]) -> f64 {
    onramp_queue_metric(time_means_m)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Running time integrals of a fixed set of queues.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueueAccumulator {
    sums: Vec<f64>,
    time_s: f64,
}

impl QueueAccumulator {
    pub fn new(n: usize) -> Self {
        Self { sums: vec![0.0; n], time_s: 0.0 }
    }

    pub fn add(&mut self, queues_m: impl IntoIterator<Item = f64>, dt_s: f64) {
        for (s, q) in self.sums.iter_mut().zip(queues_m) {
            *s += q * dt_s;
        }
        self.time_s += dt_s;
    }

    pub fn time_means(&self) -> Vec<f64> {
        if self.time_s > 0.0 {
            self.sums.iter().map(|s| s / self.time_s).collect()
        } else {
            vec![0.0; self.sums.len()]
        }
    }
}

/// One control-cycle density sample of one section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub time_s: f64,
    /// One-based section index.
    pub section: usize,
    pub density: f64,
    pub rho_star: f64,
}

/// Results of one simulation run, warm-up excluded.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Minutes; 0 when no probe qualified (see `missing`).
    pub travel_time_min: f64,
    pub stops: f64,
    pub emission_g_km: f64,
    pub fuel_g_km: f64,
    pub onramp_queue_m: f64,
    pub arterial_queue_m: f64,
    pub probes: usize,
    /// No qualifying probe completed; probe metrics are unusable.
    pub missing: bool,
    pub density: Vec<DensitySample>,
}

impl RunMetrics {
    pub fn from_parts(
        probes: &[ProbeVehicle],
        window: &ProbeWindow,
        onramp_means_m: &[f64],
        approach_means_m: &[f64],
        density: Vec<DensitySample>,
    ) -> Self {
        let count = qualifying_probes(probes, window).count();
        let em = emission_rate(probes, window);
        Self {
            travel_time_min: travel_time(probes, window).unwrap_or(0.0),
            stops: mean_stops(probes, window).unwrap_or(0.0),
            emission_g_km: em.map_or(0.0, |e| e.emission_g_km),
            fuel_g_km: em.map_or(0.0, |e| e.fuel_g_km),
            onramp_queue_m: onramp_queue_metric(onramp_means_m),
            arterial_queue_m: arterial_queue_metric(approach_means_m),
            probes: count,
            missing: count == 0,
            density,
        }
    }

    /// Component-wise mean; density series are taken from the first run.
    pub fn mean_of(runs: &[RunMetrics]) -> Self {
        let n = runs.len().max(1) as f64;
        let avg = |f: fn(&RunMetrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
        Self {
            travel_time_min: avg(|r| r.travel_time_min),
            stops: avg(|r| r.stops),
            emission_g_km: avg(|r| r.emission_g_km),
            fuel_g_km: avg(|r| r.fuel_g_km),
            onramp_queue_m: avg(|r| r.onramp_queue_m),
            arterial_queue_m: avg(|r| r.arterial_queue_m),
            probes: runs.iter().map(|r| r.probes).sum(),
            missing: runs.iter().any(|r| r.missing),
            density: runs.first().map(|r| r.density.clone()).unwrap_or_default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesosim::ProbeOrigin;

    fn probe(t_in: f64, minutes: f64, stops: u32) -> ProbeVehicle {
        let mut p = ProbeVehicle::new(ProbeOrigin::Mainline, t_in);
        p.t_out_s = Some(t_in + minutes * 60.0);
        p.stops = stops;
        p.distance_km = minutes;
        p.emission_g = 260.0 * minutes;
        p
    }

    const W: ProbeWindow = ProbeWindow { after_s: 600.0, until_s: 2400.0 };

    #[test]
    fn travel_time_examples() {
        assert_eq!(travel_time(&[probe(700.0, 12.0, 0)], &W), Some(12.0));
        assert_eq!(travel_time(&[probe(700.0, 10.0, 0), probe(800.0, 14.0, 0)], &W), Some(12.0));
        let early = probe(540.0, 30.0, 0);
        assert_eq!(travel_time(&[early.clone(), probe(700.0, 12.0, 0)], &W), Some(12.0));
        assert_eq!(travel_time(&[early], &W), None);
    }

    #[test]
    fn stop_examples() {
        let ps = [probe(700.0, 1.0, 0), probe(710.0, 1.0, 1), probe(720.0, 1.0, 2)];
        assert_eq!(mean_stops(&ps, &W), Some(1.0));
        let mut ramp = probe(730.0, 1.0, 9);
        ramp.origin = ProbeOrigin::Onramp(0);
        assert_eq!(mean_stops(&[ps[0].clone(), ramp], &W), Some(0.0));
    }

    #[test]
    fn unfinished_probes_do_not_count() {
        let mut p = probe(700.0, 5.0, 0);
        p.t_out_s = None;
        assert_eq!(travel_time(&[p], &W), None);
    }

    #[test]
    fn emission_is_per_km() {
        let one = emission_rate(&[probe(700.0, 1.0, 0)], &W).unwrap();
        let two = emission_rate(&[probe(700.0, 2.0, 0)], &W).unwrap();
        assert!((one.emission_g_km - 260.0).abs() < 1e-12);
        assert!((two.emission_g_km - one.emission_g_km).abs() < 1e-12);
        assert!((one.fuel_g_km - 260.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn queue_metrics() {
        assert_eq!(onramp_queue_metric(&[0.0; 5]), 0.0);
        assert_eq!(onramp_queue_metric(&[20.0, 40.0]), 30.0);
        let mut means = vec![0.0; 28];
        means[0] = 28.0;
        assert_eq!(arterial_queue_metric(&means), 1.0);
    }

    #[test]
    fn accumulator_time_mean() {
        let mut acc = QueueAccumulator::new(2);
        acc.add([10.0, 0.0], 1.0);
        acc.add([30.0, 4.0], 1.0);
        assert_eq!(acc.time_means(), vec![20.0, 2.0]);
    }
}
