use serde::{Deserialize, Serialize};

use super::topology::{Direction, NetworkTopology};

/// Normal distribution of an entrance's hourly flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntranceDemand {
    pub mean_veh_h: f64,
    pub std_veh_h: f64,
}

impl EntranceDemand {
    pub fn with_cv(mean_veh_h: f64, cv: f64) -> Self {
        Self { mean_veh_h, std_veh_h: cv * mean_veh_h }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntranceLocation {
    Mainline,
    /// Arterial input arriving at `intersection` heading `direction`.
    Arterial { intersection: usize, direction: Direction },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub entrances: Vec<(EntranceLocation, EntranceDemand)>,
    /// 1.0 for moderate demand, 1.4 for high demand.
    pub level_multiplier: f64,
}

impl DemandProfile {
    /// One mainline entrance plus the `2(K+1)` arterial entrances: East and West inputs
    /// at every intersection, Southbound at the first and Northbound at the last.
    pub fn for_network(
        net: &NetworkTopology,
        mainline_mean_veh_h: f64,
        arterial_mean_veh_h: f64,
        cv: f64,
        level_multiplier: f64,
    ) -> Self {
        let mut entrances = vec![(EntranceLocation::Mainline, EntranceDemand::with_cv(mainline_mean_veh_h, cv))];
        let k = net.intersections.len();
        let art = EntranceDemand::with_cv(arterial_mean_veh_h, cv);
        for i in 0..k {
            for direction in [Direction::East, Direction::West] {
                entrances.push((EntranceLocation::Arterial { intersection: i, direction }, art));
            }
        }
        if k > 0 {
            entrances.push((EntranceLocation::Arterial { intersection: 0, direction: Direction::South }, art));
            entrances.push((EntranceLocation::Arterial { intersection: k - 1, direction: Direction::North }, art));
        }
        Self { entrances, level_multiplier }
    }

    /// Level-scaled mean input at an entrance, zero if absent.
    pub fn mean_at(&self, loc: EntranceLocation) -> f64 {
        self.entrances
            .iter()
            .filter(|(l, _)| *l == loc)
            .map(|(_, d)| d.mean_veh_h * self.level_multiplier)
            .sum()
    }

    pub fn mainline_mean(&self) -> f64 {
        self.mean_at(EntranceLocation::Mainline)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::FundamentalDiagram;

    #[test]
    fn corridor_has_sixteen_arterial_entrances() {
        let net = NetworkTopology::i710_corridor(FundamentalDiagram::default());
        let d = DemandProfile::for_network(&net, 7000.0, 600.0, 0.1, 1.4);
        let arterial = d.entrances.iter().filter(|(l, _)| *l != EntranceLocation::Mainline).count();
        assert_eq!(arterial, 16);
        assert!((d.mainline_mean() - 9800.0).abs() < 1e-9);
        let sb = EntranceLocation::Arterial { intersection: 0, direction: Direction::South };
        assert!((d.mean_at(sb) - 840.0).abs() < 1e-9);
    }
}
