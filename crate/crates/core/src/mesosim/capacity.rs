use crate::netmodel::FreewaySection;
use crate::{Error, Result};

/// Allowed ramp-meter red durations (s) and the admission rate each implies.
pub const RED_DURATIONS_S: [f64; 8] = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];
pub const METERING_RATES_VEH_H: [f64; 8] = [1800.0, 1029.0, 900.0, 800.0, 720.0, 600.0, 514.0, 400.0];

/// On-ramp admission rate for a red duration: one vehicle per 3 s green plus red,
/// with red = 0 meaning unmetered saturation flow.
pub fn metering_rate(red_s: f64) -> Result<f64> {
    RED_DURATIONS_S
        .iter()
        .position(|r| (r - red_s).abs() < 1e-9)
        .map(|i| METERING_RATES_VEH_H[i])
        .ok_or_else(|| Error::InvalidInput(format!("red duration {red_s} s is not a metering setting")))
}

/// Index into [`RED_DURATIONS_S`] of the setting whose rate is nearest `rate`.
pub fn nearest_metering_setting(rate_veh_h: f64) -> usize {
    let mut best = 0;
    for (i, r) in METERING_RATES_VEH_H.iter().enumerate() {
        if (r - rate_veh_h).abs() < (METERING_RATES_VEH_H[best] - rate_veh_h).abs() {
            best = i;
        }
    }
    best
}

/// Discharge capacity at the end of `section` with `closed_lanes` lanes blocked.
///
/// Without a closure this is the section capacity `C`; with one it is
/// `C_b = C (n-1)/n`, reduced by the capacity drop once the queue behind it has
/// formed, or by the smaller advisory drop when lane-change advisories are on.
pub fn bottleneck_capacity(section: &FreewaySection, closed_lanes: u32, congested: bool, lc_active: bool, lc_drop: f64) -> f64 {
    let c = section.fd.capacity_veh_h;
    if closed_lanes == 0 {
        return c;
    }
    let lanes = f64::from(section.lane_count);
    let open = (lanes - f64::from(closed_lanes.min(section.lane_count))) / lanes;
    let c_b = c * open;
    match (congested, lc_active) {
        (false, _) => c_b,
        (true, false) => (1.0 - section.fd.capacity_drop) * c_b,
        (true, true) => (1.0 - lc_drop) * c_b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{FundamentalDiagram, NetworkTopology};

    #[test]
    fn metering_table() {
        assert_eq!(metering_rate(0.0).unwrap(), 1800.0);
        assert_eq!(metering_rate(1.0).unwrap(), 900.0);
        assert_eq!(metering_rate(6.0).unwrap(), 400.0);
        assert!(metering_rate(5.0).is_err());
        // one vehicle per (3 + red) seconds, rounded
        for (red, rate) in RED_DURATIONS_S.iter().zip(METERING_RATES_VEH_H).skip(1) {
            assert!((3600.0 / (3.0 + red) - rate).abs() < 0.5 + 1e-9, "{red}");
        }
        assert_eq!(nearest_metering_setting(1700.0), 0);
        assert_eq!(nearest_metering_setting(410.0), 7);
    }

    #[test]
    fn bottleneck_cases() {
        let net = NetworkTopology::i710_corridor(FundamentalDiagram::default());
        let s = &net.sections[3];
        assert_eq!(bottleneck_capacity(s, 0, true, false, 0.05), 10_000.0);
        assert!((bottleneck_capacity(s, 1, false, false, 0.05) - 8000.0).abs() < 1e-9);
        assert!((bottleneck_capacity(s, 1, true, false, 0.05) - 6800.0).abs() < 1e-9);
        assert!((bottleneck_capacity(s, 1, true, true, 0.05) - 7600.0).abs() < 1e-9);
    }
}
