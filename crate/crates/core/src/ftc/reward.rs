use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub reference_queue_m: f64,
    pub desired_density_veh_km: f64,
    pub section_length_km: f64,
    pub free_flow_speed_kmh: f64,
}

/// `max{0, (1 - w_o/w_r) L/(T_t v_f) - (rho/rho* - 1)^2}`, capped at 1.
/// `travel_time_min` is the section travel time in minutes.
pub fn compute_reward(travel_time_min: f64, onramp_queue_m: f64, density_veh_km: f64, p: &RewardParams) -> f64 {
    let free_min = p.section_length_km / p.free_flow_speed_kmh * 60.0;
    let speed_term = (1.0 - onramp_queue_m / p.reference_queue_m) * free_min / travel_time_min;
    let dev = density_veh_km / p.desired_density_veh_km - 1.0;
    (speed_term - dev * dev).clamp(0.0, 1.0)
}

/// `rho* = min{d, 0.95 C_b} / v_f`.
pub fn desired_density(demand_veh_h: f64, bottleneck_capacity_veh_h: f64, free_flow_speed_kmh: f64) -> f64 {
    demand_veh_h.min(0.95 * bottleneck_capacity_veh_h) / free_flow_speed_kmh
}

/// Section travel time when no probe left the section during the cycle: length over
/// space-mean speed, never faster than free flow. Minutes.
pub fn fallback_travel_time_min(length_km: f64, space_mean_speed_kmh: f64, free_flow_speed_kmh: f64) -> f64 {
    let v = if space_mean_speed_kmh > 0.0 { space_mean_speed_kmh.min(free_flow_speed_kmh) } else { free_flow_speed_kmh };
    length_km / v * 60.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rho_star: f64) -> RewardParams {
        RewardParams {
            reference_queue_m: 300.0,
            desired_density_veh_km: rho_star,
            section_length_km: 1.6,
            free_flow_speed_kmh: 100.0,
        }
    }

    #[test]
    fn ideal_condition_scores_one() {
        let p = params(80.0);
        assert!((compute_reward(0.96, 0.0, 80.0, &p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_ramp_scores_zero() {
        let p = params(80.0);
        assert_eq!(compute_reward(0.96, 300.0, 80.0, &p), 0.0);
        assert_eq!(compute_reward(3.0, 450.0, 10.0, &p), 0.0);
    }

    #[test]
    fn worked_example() {
        let p = params(80.0);
        let r = compute_reward(2.0 * 0.96, 150.0, 1.2 * 80.0, &p);
        assert!((r - 0.21).abs() < 1e-12);
    }

    #[test]
    fn faster_than_free_flow_is_capped() {
        let p = params(80.0);
        assert_eq!(compute_reward(0.5, 0.0, 80.0, &p), 1.0);
    }

    #[test]
    fn desired_density_examples() {
        assert!((desired_density(9000.0, 8000.0, 100.0) - 76.0).abs() < 1e-12);
        assert!((desired_density(5000.0, 8000.0, 100.0) - 50.0).abs() < 1e-12);
        assert!((desired_density(9500.0, 10_000.0, 100.0) - 95.0).abs() < 1e-12);
    }

    #[test]
    fn fallback_is_floored_at_free_flow() {
        assert!((fallback_travel_time_min(1.6, 50.0, 100.0) - 1.92).abs() < 1e-12);
        assert!((fallback_travel_time_min(1.6, 130.0, 100.0) - 0.96).abs() < 1e-12);
        assert!((fallback_travel_time_min(1.6, 0.0, 100.0) - 0.96).abs() < 1e-12);
    }
}
