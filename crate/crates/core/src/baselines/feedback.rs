use serde::{Deserialize, Serialize};

use crate::ftc::{MAX_SPEED_KMH, MIN_SPEED_KMH, SPEED_STEP_KMH};
use crate::mesosim::{nearest_metering_setting, METERING_RATES_VEH_H, RED_DURATIONS_S};
use crate::netmodel::FundamentalDiagram;

pub const MIN_METERING_RATE_VEH_H: f64 = 400.0;
pub const MAX_METERING_RATE_VEH_H: f64 = 1800.0;

/// Proportional speed-limit gain plus occupancy-feedback metering gain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackGains {
    /// km/h per veh/km of density error.
    pub speed_gain: f64,
    /// veh/h per unit of occupancy error (70 veh/h per 0.01).
    pub ramp_gain_veh_h: f64,
    pub occupancy_setpoint: f64,
}

impl FeedbackGains {
    /// Default gains with the setpoint at the critical occupancy.
    pub fn for_section(fd: &FundamentalDiagram, lanes: u32, spacing_m: f64) -> Self {
        Self {
            speed_gain: 0.5,
            ramp_gain_veh_h: 7000.0,
            occupancy_setpoint: occupancy(fd.critical_density_veh_km, lanes, spacing_m),
        }
    }
}

/// Fraction of road length covered by vehicles.
pub fn occupancy(density_veh_km: f64, lanes: u32, spacing_m: f64) -> f64 {
    density_veh_km * spacing_m / (1000.0 * f64::from(lanes.max(1)))
}

/// Controller memory of one section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackControls {
    pub speed_limit_kmh: f64,
    /// Unquantised metering rate carried between steps.
    pub metering_rate_veh_h: f64,
    pub lc: bool,
}

impl Default for FeedbackControls {
    fn default() -> Self {
        Self { speed_limit_kmh: MAX_SPEED_KMH, metering_rate_veh_h: MAX_METERING_RATE_VEH_H, lc: false }
    }
}

impl FeedbackControls {
    /// Nearest listed metering rate.
    pub fn applied_rate_veh_h(&self) -> f64 {
        METERING_RATES_VEH_H[nearest_metering_setting(self.metering_rate_veh_h)]
    }

    pub fn red_s(&self) -> f64 {
        RED_DURATIONS_S[nearest_metering_setting(self.metering_rate_veh_h)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackMeasurement {
    pub density_veh_km: f64,
    pub desired_density_veh_km: f64,
    pub occupancy: f64,
    pub onramp_queue_m: f64,
    pub reference_queue_m: f64,
    pub closed_lanes: u8,
}

pub fn feedback_step(prev: &FeedbackControls, m: &FeedbackMeasurement, gains: &FeedbackGains) -> FeedbackControls {
    let raw = prev.speed_limit_kmh + gains.speed_gain * (m.desired_density_veh_km - m.density_veh_km);
    let quantised = (raw.clamp(MIN_SPEED_KMH, MAX_SPEED_KMH) / SPEED_STEP_KMH).round() * SPEED_STEP_KMH;
    let speed = quantised.clamp(prev.speed_limit_kmh - SPEED_STEP_KMH, prev.speed_limit_kmh + SPEED_STEP_KMH);
    let rate = if m.onramp_queue_m >= m.reference_queue_m {
        MAX_METERING_RATE_VEH_H
    } else {
        (prev.metering_rate_veh_h + gains.ramp_gain_veh_h * (gains.occupancy_setpoint - m.occupancy))
            .clamp(MIN_METERING_RATE_VEH_H, MAX_METERING_RATE_VEH_H)
    };
    FeedbackControls { speed_limit_kmh: speed, metering_rate_veh_h: rate, lc: m.closed_lanes > 0 }
}

/// Per-section controls with nothing active.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionControls {
    pub speed_limit_kmh: f64,
    pub red_s: f64,
    pub lc: bool,
}

pub fn no_control() -> SectionControls {
    SectionControls { speed_limit_kmh: MAX_SPEED_KMH, red_s: 0.0, lc: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesosim::metering_rate;

    fn gains() -> FeedbackGains {
        FeedbackGains::for_section(&FundamentalDiagram::default(), 5, 7.5)
    }

    fn at_setpoint(prev: &FeedbackControls) -> FeedbackMeasurement {
        let g = gains();
        FeedbackMeasurement {
            density_veh_km: 80.0,
            desired_density_veh_km: 80.0,
            occupancy: g.occupancy_setpoint,
            onramp_queue_m: 0.0,
            reference_queue_m: 300.0,
            closed_lanes: u8::from(prev.lc),
        }
    }

    #[test]
    fn setpoint_is_critical_occupancy() {
        assert!((gains().occupancy_setpoint - 0.15).abs() < 1e-12);
    }

    #[test]
    fn zero_error_keeps_controls() {
        let prev = FeedbackControls { speed_limit_kmh: 80.0, metering_rate_veh_h: 900.0, lc: false };
        assert_eq!(feedback_step(&prev, &at_setpoint(&prev), &gains()), prev);
    }

    #[test]
    fn speed_is_rate_limited() {
        let prev = FeedbackControls::default();
        let mut m = at_setpoint(&prev);
        m.density_veh_km = 300.0;
        let next = feedback_step(&prev, &m, &gains());
        assert_eq!(next.speed_limit_kmh, 90.0);
        let next = feedback_step(&next, &m, &gains());
        assert_eq!(next.speed_limit_kmh, 80.0);
    }

    #[test]
    fn long_ramp_queue_releases_the_meter() {
        let prev = FeedbackControls { speed_limit_kmh: 100.0, metering_rate_veh_h: 400.0, lc: false };
        let mut m = at_setpoint(&prev);
        m.onramp_queue_m = 350.0;
        m.occupancy = 0.5;
        let next = feedback_step(&prev, &m, &gains());
        assert_eq!(next.applied_rate_veh_h(), 1800.0);
        assert_eq!(next.red_s(), 0.0);
    }

    #[test]
    fn lc_follows_closure() {
        let prev = FeedbackControls::default();
        let mut m = at_setpoint(&prev);
        m.closed_lanes = 1;
        assert!(feedback_step(&prev, &m, &gains()).lc);
    }

    #[test]
    fn no_control_is_inactive() {
        let c = no_control();
        assert_eq!(c.speed_limit_kmh, 100.0);
        assert_eq!(metering_rate(c.red_s).unwrap(), 1800.0);
        assert!(!c.lc);
    }
}
