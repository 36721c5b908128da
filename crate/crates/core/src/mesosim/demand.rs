use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::netmodel::{DemandProfile, EntranceLocation};

/// Per-entrance arrival generator. Each entrance's hourly rate is a normal draw,
/// floored at zero and refreshed every `refresh_s`; arrivals within a tick are Poisson.
#[derive(Clone, Debug)]
pub struct DemandSampler {
    means: Vec<f64>,
    stds: Vec<f64>,
    locations: Vec<EntranceLocation>,
    rates: Vec<f64>,
    refresh_s: f64,
    next_refresh_s: f64,
}

impl DemandSampler {
    pub fn new(profile: &DemandProfile, refresh_s: f64) -> Self {
        let m = profile.level_multiplier;
        Self {
            means: profile.entrances.iter().map(|(_, d)| d.mean_veh_h * m).collect(),
            stds: profile.entrances.iter().map(|(_, d)| d.std_veh_h * m).collect(),
            locations: profile.entrances.iter().map(|(l, _)| *l).collect(),
            rates: vec![0.0; profile.entrances.len()],
            refresh_s: refresh_s.max(f64::MIN_POSITIVE),
            next_refresh_s: 0.0,
        }
    }

    pub fn locations(&self) -> &[EntranceLocation] {
        &self.locations
    }

    /// Current hourly rates.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Arrivals at every entrance during `[t, t + dt)`, written into `out`.
    pub fn sample(&mut self, t_s: f64, dt_s: f64, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        if t_s >= self.next_refresh_s {
            for ((rate, &mu), &sigma) in self.rates.iter_mut().zip(&self.means).zip(&self.stds) {
                *rate = if sigma > 0.0 {
                    Normal::new(mu, sigma).map_or(mu, |n| n.sample(rng)).max(0.0)
                } else {
                    mu.max(0.0)
                };
            }
            while self.next_refresh_s <= t_s {
                self.next_refresh_s += self.refresh_s;
            }
        }
        for (o, &rate) in out.iter_mut().zip(&self.rates) {
            let lambda = rate * dt_s / 3600.0;
            *o = if lambda > 0.0 { poisson(lambda, rng) } else { 0.0 };
        }
    }
}

fn poisson(lambda: f64, rng: &mut ChaCha8Rng) -> f64 {
    Poisson::new(lambda).map_or(0.0, |d| d.sample(rng))
}
