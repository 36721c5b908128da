//! Single signalised intersection used to calibrate the cycle model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::arterial::IntersectionState;
use super::probe::emission_g_per_h;
use crate::netmodel::{Direction, Intersection, Movement};
use crate::tsc::SignalPlan;
use crate::Result;

/// Geometry and timing of an isolated-intersection run.
#[derive(Clone, Debug, PartialEq)]
pub struct IsolatedScene {
    pub intersection: Intersection,
    /// Upstream plus downstream approach length travelled by every vehicle.
    pub path_length_km: f64,
    pub cruise_speed_kmh: f64,
    pub warmup_s: f64,
    pub duration_s: f64,
    pub dt_s: f64,
}

impl Default for IsolatedScene {
    fn default() -> Self {
        Self {
            intersection: Intersection::default(),
            path_length_km: 1.0,
            cruise_speed_kmh: 50.0,
            warmup_s: 600.0,
            duration_s: 4200.0,
            dt_s: 1.0,
        }
    }
}

/// Averages over vehicles arriving after the warm-up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsolatedMetrics {
    pub travel_time_s: f64,
    pub fuel_g: f64,
    pub emission_g_km: f64,
    pub arrivals_veh: f64,
}

impl IsolatedScene {
    /// Runs `plan` under Poisson arrivals of `demand_veh_h` on every approach.
    ///
    /// Queueing delay follows from the time-integral of queued vehicles divided by
    /// arrivals (vehicles still queued at the end contribute the delay they have
    /// accrued so far). Idling emits at the zero-speed rate of the emission proxy.
    pub fn run(&self, plan: &SignalPlan, demand_veh_h: f64, seed: u64) -> Result<IsolatedMetrics> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = IntersectionState::new(plan.clone(), 0.0);
        let ix = &self.intersection;
        let lambda = demand_veh_h * self.dt_s / 3600.0;
        let poisson = (lambda > 0.0).then(|| Poisson::new(lambda)).transpose().map_err(|e| {
            crate::Error::InvalidInput(format!("bad demand {demand_veh_h}: {e}"))
        })?;
        let mut queued_time = 0.0;
        let mut arrivals = 0.0;
        let steps = (self.duration_s / self.dt_s).round() as usize;
        for n in 0..steps {
            let t = n as f64 * self.dt_s;
            let measuring = t >= self.warmup_s;
            for dir in Direction::ALL {
                let a = poisson.as_ref().map_or(0.0, |p| p.sample(&mut rng));
                st.approaches[dir.index()].add_split(a, ix.turn_ratios.approach(dir));
                if measuring {
                    arrivals += a;
                }
            }
            st.roll_cycle(t, plan);
            let cap = st.discharge_capacity(ix, t, self.dt_s);
            for dir in Direction::ALL {
                for mov in Movement::ALL {
                    let q = &mut st.approaches[dir.index()].queued_veh[mov.index()];
                    *q -= q.min(cap[dir.index()][mov.index()]);
                }
            }
            if measuring {
                queued_time += st.total_queued() * self.dt_s;
            }
        }
        let free_s = self.path_length_km / self.cruise_speed_kmh * 3600.0;
        let delay_s = if arrivals > 0.0 { queued_time / arrivals } else { 0.0 };
        let cruise_g = emission_g_per_h(self.cruise_speed_kmh) * free_s / 3600.0;
        let idle_g = emission_g_per_h(0.0) * delay_s / 3600.0;
        let emission_g_km = (cruise_g + idle_g) / self.path_length_km;
        Ok(IsolatedMetrics {
            travel_time_s: free_s + delay_s,
            fuel_g: (cruise_g + idle_g) * super::probe::FUEL_PER_EMISSION,
            emission_g_km,
            arrivals_veh: arrivals,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_intersection_is_free_flow() {
        let scene = IsolatedScene::default();
        let m = scene.run(&SignalPlan::uniform(60.0, 16.0), 0.0, 1).unwrap();
        assert!((m.travel_time_s - 72.0).abs() < 1e-9);
        assert!((m.emission_g_km - (90.0 + 100.0 + 30.0)).abs() < 1e-9);
    }

    #[test]
    fn delay_grows_with_demand() {
        let scene = IsolatedScene::default();
        let plan = SignalPlan::uniform(80.0, 16.0);
        let low = scene.run(&plan, 300.0, 2).unwrap();
        let high = scene.run(&plan, 900.0, 2).unwrap();
        assert!(high.travel_time_s > low.travel_time_s);
    }
}
