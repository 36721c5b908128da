use serde::{Deserialize, Serialize};

use crate::netmodel::FundamentalDiagram;
use crate::{Error, Result};

/// Safety factor applied to the minimal zone length.
pub const ZONE_SAFETY_FACTOR: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpstreamMode {
    None,
    Bottleneck,
    BottleneckWithDrop,
}

/// Speed limit upstream of the controlled sections whose capacity matches the
/// bottleneck discharge, rounded to the nearest 5 km/h.
pub fn upstream_vsl_command(mode: UpstreamMode, fd: &FundamentalDiagram, bottleneck_capacity_veh_h: f64) -> Result<f64> {
    let w = fd.backward_wave_kmh;
    let target = match mode {
        UpstreamMode::None => return Ok(fd.free_flow_speed_kmh),
        UpstreamMode::Bottleneck => bottleneck_capacity_veh_h,
        UpstreamMode::BottleneckWithDrop => (1.0 - fd.capacity_drop) * bottleneck_capacity_veh_h,
    };
    if bottleneck_capacity_veh_h > fd.capacity_veh_h + 1e-9 {
        return Err(Error::InvalidInput(format!(
            "bottleneck capacity {bottleneck_capacity_veh_h} exceeds section capacity {}",
            fd.capacity_veh_h
        )));
    }
    let denom = w * fd.jam_density_veh_km - target;
    if !(denom > 0.0) {
        return Err(Error::Nonphysical(format!("w*rho_j - C_b = {denom} is not positive")));
    }
    let v = w * target / denom;
    Ok(((v / 5.0).round() * 5.0).min(fd.free_flow_speed_kmh))
}

/// Shortest upstream zone length (km) that keeps the queue from reaching back into
/// the zone before it clears, times [`ZONE_SAFETY_FACTOR`], floored at zero.
///
/// `mean_density` is the mean density between section 1 and the bottleneck,
/// `zone_density` the density inside the zone, `distance_km` the distance from the
/// start of section 1 to the bottleneck.
pub fn upstream_vsl_location(
    mean_density_veh_km: f64,
    zone_density_veh_km: f64,
    distance_km: f64,
    upstream_limit_kmh: f64,
    fd: &FundamentalDiagram,
    bottleneck_capacity_veh_h: f64,
) -> Result<f64> {
    let dropped = (1.0 - fd.capacity_drop) * bottleneck_capacity_veh_h;
    let denom = (dropped - upstream_limit_kmh * zone_density_veh_km) * fd.free_flow_speed_kmh;
    if !(denom > 0.0) {
        return Err(Error::Nonphysical(format!(
            "zone admission {} veh/h is not below the dropped capacity {dropped} veh/h",
            upstream_limit_kmh * zone_density_veh_km
        )));
    }
    let numer = (fd.free_flow_speed_kmh * mean_density_veh_km - dropped) * upstream_limit_kmh * distance_km;
    Ok((numer / denom * ZONE_SAFETY_FACTOR).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_examples() {
        let fd = FundamentalDiagram::default();
        assert_eq!(upstream_vsl_command(UpstreamMode::None, &fd, 8000.0).unwrap(), 100.0);
        assert_eq!(upstream_vsl_command(UpstreamMode::Bottleneck, &fd, 8000.0).unwrap(), 45.0);
        assert_eq!(upstream_vsl_command(UpstreamMode::BottleneckWithDrop, &fd, 8000.0).unwrap(), 30.0);
    }

    #[test]
    fn zero_drop_matches_plain_bottleneck() {
        let mut fd = FundamentalDiagram::default();
        fd.capacity_drop = 0.0;
        for cb in [5000.0, 7000.0, 8000.0, 9000.0] {
            assert_eq!(
                upstream_vsl_command(UpstreamMode::BottleneckWithDrop, &fd, cb).unwrap(),
                upstream_vsl_command(UpstreamMode::Bottleneck, &fd, cb).unwrap()
            );
        }
    }

    #[test]
    fn nonphysical_command_is_rejected() {
        let mut fd = FundamentalDiagram::default();
        fd.jam_density_veh_km = 300.0;
        assert!(upstream_vsl_command(UpstreamMode::Bottleneck, &fd, 8000.0).is_err());
    }

    #[test]
    fn location_examples() {
        let fd = FundamentalDiagram::default();
        let l = upstream_vsl_location(90.0, 40.0, 6.4, 30.0, &fd, 8000.0).unwrap();
        let bound: f64 = (9000.0 - 6800.0) * 30.0 * 6.4 / ((6800.0 - 1200.0) * 100.0);
        assert!((bound - 0.754).abs() < 1e-3);
        assert!((l - 1.1 * bound).abs() < 1e-12);
        assert_eq!(upstream_vsl_location(68.0, 40.0, 6.4, 30.0, &fd, 8000.0).unwrap(), 0.0);
        assert!(upstream_vsl_location(90.0, 300.0, 6.4, 30.0, &fd, 8000.0).is_err());
    }
}
