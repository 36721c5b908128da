use serde::{Deserialize, Serialize};

use crate::qcore::StateKey;

/// Continuous observation of one freeway section and its paired intersection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FtcRawState {
    pub density_veh_km: f64,
    /// `q_i - q_{i+1} + r_i - s_i`, may be negative.
    pub net_inflow_veh_h: f64,
    pub onramp_queue_m: f64,
    pub closed_lanes: u8,
    /// Dominant phase (1..=5) of the paired intersection's next cycle.
    pub dominant_phase: u8,
    pub demand_east_veh_h: f64,
    pub demand_south_veh_h: f64,
    pub demand_west_veh_h: f64,
    pub demand_north_veh_h: f64,
}

/// Snap to the nearest multiple of `step` inside `[lo, hi]`, halves rounding up.
pub fn snap(value: f64, step: f64, lo: f64, hi: f64) -> i32 {
    let v = value.clamp(lo, hi);
    ((v / step + 0.5).floor() * step) as i32
}

pub fn density_bin(rho: f64) -> i32 {
    snap(rho, 10.0, 20.0, 150.0)
}

pub fn flow_bin(q: f64) -> i32 {
    snap(q, 100.0, 0.0, 4000.0)
}

pub fn queue_bin(w: f64) -> i32 {
    snap(w, 50.0, 0.0, 500.0)
}

/// Coordinated agent state: density, net inflow, on-ramp queue, closed lanes,
/// dominant phase and the four approach demands, each as its bin value.
pub fn discretize_state(raw: &FtcRawState) -> StateKey {
    StateKey(vec![
        density_bin(raw.density_veh_km),
        flow_bin(raw.net_inflow_veh_h),
        queue_bin(raw.onramp_queue_m),
        i32::from(raw.closed_lanes),
        i32::from(raw.dominant_phase),
        flow_bin(raw.demand_east_veh_h),
        flow_bin(raw.demand_south_veh_h),
        flow_bin(raw.demand_west_veh_h),
        flow_bin(raw.demand_north_veh_h),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_round_half_up_and_clamp() {
        assert_eq!(density_bin(74.9), 70);
        assert_eq!(density_bin(75.0), 80);
        assert_eq!(density_bin(3.0), 20);
        assert_eq!(density_bin(400.0), 150);
        assert_eq!(flow_bin(-300.0), 0);
        assert_eq!(flow_bin(4250.0), 4000);
        assert_eq!(flow_bin(1049.0), 1000);
        assert_eq!(queue_bin(525.0), 500);
        assert_eq!(queue_bin(74.0), 50);
        assert_eq!(queue_bin(75.0), 100);
    }

    #[test]
    fn key_layout() {
        let raw = FtcRawState {
            density_veh_km: 76.0,
            net_inflow_veh_h: 120.0,
            onramp_queue_m: 30.0,
            closed_lanes: 1,
            dominant_phase: 4,
            demand_east_veh_h: 610.0,
            demand_south_veh_h: 590.0,
            demand_west_veh_h: 1020.0,
            demand_north_veh_h: 0.0,
        };
        assert_eq!(discretize_state(&raw).0, vec![80, 100, 50, 1, 4, 600, 600, 1000, 0]);
    }
}
