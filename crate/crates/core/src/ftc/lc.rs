use serde::{Deserialize, Serialize};

use crate::netmodel::NetworkTopology;
use crate::{Error, Result};

/// Default advisory zone length upstream of a lane drop or merge (km).
pub const LC_ZONE_KM: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LcTarget {
    LaneDrop,
    OnrampMerge,
}

/// Advisory zone `[start, end]` in km from the start of section 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcZone {
    pub start_km: f64,
    pub end_km: f64,
}

impl LcZone {
    pub fn length_km(&self) -> f64 {
        self.end_km - self.start_km
    }
}

/// Location of the merge point of `section`'s on-ramp: the upstream edge of the
/// middle cell of the section.
pub fn merge_point_km(net: &NetworkTopology, section: usize) -> f64 {
    let s = &net.sections[section];
    let cells = ((s.length_km / net.cell_length_km).round() as usize).max(1);
    let start = if section == 0 { 0.0 } else { net.distance_to_section_end_km(section - 1) };
    start + (cells / 2) as f64 * s.length_km / cells as f64
}

/// Zone of `zone_km` upstream of the lane drop (end of `section`) or of its merge.
pub fn lc_zone(net: &NetworkTopology, section: usize, target: LcTarget, zone_km: f64) -> Result<LcZone> {
    let s = net
        .sections
        .get(section)
        .ok_or_else(|| Error::InvalidInput(format!("section {} does not exist", section + 1)))?;
    let end_km = match target {
        LcTarget::LaneDrop => net.distance_to_section_end_km(section),
        LcTarget::OnrampMerge => {
            if s.onramp.is_none() {
                return Err(Error::InvalidInput(format!("section {} has no on-ramp", section + 1)));
            }
            merge_point_km(net, section)
        }
    };
    Ok(LcZone { start_km: end_km - zone_km, end_km })
}

/// Lane-drop advisories run whenever a lane is closed; merge advisories follow the
/// agent's flag.
pub fn lc_zone_active(target: LcTarget, closed_lanes: u8, lc_flag: bool) -> bool {
    match target {
        LcTarget::LaneDrop => closed_lanes > 0,
        LcTarget::OnrampMerge => lc_flag,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::FundamentalDiagram;

    #[test]
    fn lane_drop_zone_in_section_four() {
        let net = NetworkTopology::i710_corridor(FundamentalDiagram::default());
        let z = lc_zone(&net, 3, LcTarget::LaneDrop, LC_ZONE_KM).unwrap();
        assert!((z.end_km - 6.4).abs() < 1e-12);
        assert!((z.start_km - 5.6).abs() < 1e-12);
    }

    #[test]
    fn merge_zone_depends_on_flag() {
        let net = NetworkTopology::i710_corridor(FundamentalDiagram::default());
        assert!(!lc_zone_active(LcTarget::OnrampMerge, 0, false));
        assert!(lc_zone_active(LcTarget::OnrampMerge, 0, true));
        let z = lc_zone(&net, 0, LcTarget::OnrampMerge, LC_ZONE_KM).unwrap();
        assert!((z.length_km() - 0.8).abs() < 1e-12);
        assert!(lc_zone(&net, 5, LcTarget::OnrampMerge, LC_ZONE_KM).is_err());
        assert!(lc_zone_active(LcTarget::LaneDrop, 1, false));
    }
}
