use serde::{Deserialize, Serialize};

use super::cycle::CycleModel;
use super::demand::DemandEstimate;
use crate::netmodel::{Direction, Movement, TurnRatios};
use crate::{Error, Result};

pub const PHASES: usize = 5;

/// Which movements phase `phase` (0-based) serves in the fixed five-phase scheme:
/// 1 Southbound all, 2 N/S through and right, 3 Northbound all,
/// 4 E/W through and right, 5 E/W left.
pub fn phase_serves(phase: usize, dir: Direction, mov: Movement) -> bool {
    use Direction::*;
    let tr = matches!(mov, Movement::Through | Movement::Right);
    match phase {
        0 => dir == South,
        1 => matches!(dir, South | North) && tr,
        2 => dir == North,
        3 => matches!(dir, East | West) && tr,
        4 => matches!(dir, East | West) && mov == Movement::Left,
        _ => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRatios {
    pub per_phase: [f64; PHASES],
}

impl FlowRatios {
    pub fn sum(&self) -> f64 {
        self.per_phase.iter().sum()
    }
}

/// Flow ratio of each phase group from estimated approach demands.
pub fn flow_ratios(est: &DemandEstimate, y: &TurnRatios, saturation_veh_h: [f64; 4]) -> Result<FlowRatios> {
    if saturation_veh_h.iter().any(|q| !(*q > 0.0)) {
        return Err(Error::InvalidInput("saturation flows must be positive".into()));
    }
    let q = |d: Direction| saturation_veh_h[d.index()];
    let tr = |d: Direction| y.get(d, Movement::Through) + y.get(d, Movement::Right);
    use Direction::*;
    let per_phase = [
        est.south / q(South),
        tr(South) * est.south / q(South) + tr(North) * est.north / q(North),
        est.north / q(North),
        tr(West) * est.west / q(West) + tr(East) * est.east / q(East),
        y.get(West, Movement::Left) * est.west / q(West) + y.get(East, Movement::Left) * est.east / q(East),
    ];
    Ok(FlowRatios { per_phase })
}

/// Green time of each phase: `(T_c - T_l) * Y_j / Y`, equal shares when `Y = 0`.
pub fn green_splits(cycle_s: f64, lost_time_s: f64, ratios: &FlowRatios) -> Result<[f64; PHASES]> {
    if !(cycle_s > lost_time_s) {
        return Err(Error::InvalidInput(format!("cycle {cycle_s} s must exceed lost time {lost_time_s} s")));
    }
    let effective = cycle_s - lost_time_s;
    let y = ratios.sum();
    if y > 0.0 {
        Ok(ratios.per_phase.map(|yj| effective * yj / y))
    } else {
        Ok([effective / PHASES as f64; PHASES])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalPlan {
    pub cycle_s: f64,
    pub green_s: [f64; PHASES],
    pub lost_time_s: f64,
    pub offset_s: f64,
}

impl SignalPlan {
    pub fn new(cycle_s: f64, lost_time_s: f64, ratios: &FlowRatios) -> Result<Self> {
        Ok(Self { cycle_s, green_s: green_splits(cycle_s, lost_time_s, ratios)?, lost_time_s, offset_s: 0.0 })
    }

    /// Equal-split plan, used before any demand has been observed.
    pub fn uniform(cycle_s: f64, lost_time_s: f64) -> Self {
        let g = (cycle_s - lost_time_s) / PHASES as f64;
        Self { cycle_s, green_s: [g; PHASES], lost_time_s, offset_s: 0.0 }
    }

    /// Active phase at `t` seconds into the cycle; `None` during the transition
    /// interval after each phase (the lost time is split evenly across phases).
    pub fn phase_at(&self, t_in_cycle_s: f64) -> Option<usize> {
        let transition = self.lost_time_s / PHASES as f64;
        let mut start = 0.0;
        for (j, g) in self.green_s.iter().enumerate() {
            if t_in_cycle_s >= start && t_in_cycle_s < start + g {
                return Some(j);
            }
            start += g + transition;
        }
        None
    }

    pub fn green_for(&self, dir: Direction, mov: Movement) -> f64 {
        (0..PHASES).filter(|&j| phase_serves(j, dir, mov)).map(|j| self.green_s[j]).sum()
    }
}

/// One-based index of the phase with the longest green, ties to the lowest index.
pub fn dominant_phase(plan: &SignalPlan) -> u8 {
    let mut best = 0;
    for j in 1..PHASES {
        if plan.green_s[j] > plan.green_s[best] {
            best = j;
        }
    }
    best as u8 + 1
}

/// Traffic-responsive plan selection for one intersection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalController {
    pub model: CycleModel,
}

impl SignalController {
    pub fn new(model: CycleModel) -> Self {
        Self { model }
    }

    /// Cycle from the snapped model; an oversaturated estimate (`Y >= 1`) falls back
    /// to the longest cycle with flow-proportional splits.
    pub fn plan(&self, est: &DemandEstimate, y: &TurnRatios, saturation_veh_h: [f64; 4]) -> Result<SignalPlan> {
        let ratios = flow_ratios(est, y, saturation_veh_h)?;
        let cycle = match self.model.cycle(ratios.sum()) {
            Ok(c) => c,
            Err(Error::Oversaturated(_)) => self.model.max_cycle(),
            Err(e) => return Err(e),
        };
        SignalPlan::new(cycle, self.model.lost_time_s, &ratios)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric() -> (DemandEstimate, TurnRatios) {
        let est = DemandEstimate { east: 1800.0, south: 1800.0, west: 1800.0, north: 1800.0 };
        (est, TurnRatios::uniform(0.25, 0.5, 0.25))
    }

    #[test]
    fn flow_ratio_example() {
        let (est, y) = symmetric();
        let r = flow_ratios(&est, &y, [7200.0; 4]).unwrap();
        let expect = [0.25, 0.375, 0.25, 0.375, 0.125];
        for (a, b) in r.per_phase.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((r.sum() - 1.375).abs() < 1e-12);
        let zero = flow_ratios(&DemandEstimate::default(), &y, [7200.0; 4]).unwrap();
        assert_eq!(zero.sum(), 0.0);
    }

    #[test]
    fn split_examples() {
        let equal = FlowRatios { per_phase: [0.1; 5] };
        for g in green_splits(100.0, 16.0, &equal).unwrap() {
            assert!((g - 16.8).abs() < 1e-12);
        }
        let r = FlowRatios { per_phase: [0.25, 0.375, 0.25, 0.375, 0.125] };
        let g = green_splits(150.0, 16.0, &r).unwrap();
        let expect = [24.363_636, 36.545_454, 24.363_636, 36.545_454, 12.181_818];
        for (a, b) in g.iter().zip(expect) {
            assert!((a - b).abs() < 1e-5);
        }
        assert!((g.iter().sum::<f64>() - 134.0).abs() < 1e-9);
        let zero = green_splits(60.0, 16.0, &FlowRatios { per_phase: [0.0; 5] }).unwrap();
        assert_eq!(zero, [8.8; 5]);
        assert!(green_splits(10.0, 16.0, &r).is_err());
    }

    #[test]
    fn dominant_phase_examples() {
        let r = FlowRatios { per_phase: [0.25, 0.375, 0.25, 0.375, 0.125] };
        assert_eq!(dominant_phase(&SignalPlan::new(150.0, 16.0, &r).unwrap()), 2);
        assert_eq!(dominant_phase(&SignalPlan::uniform(100.0, 16.0)), 1);
        let five = FlowRatios { per_phase: [0.1, 0.1, 0.1, 0.1, 0.5] };
        assert_eq!(dominant_phase(&SignalPlan::new(100.0, 16.0, &five).unwrap()), 5);
    }

    #[test]
    fn phase_timeline_covers_cycle() {
        let plan = SignalPlan::uniform(100.0, 16.0);
        assert_eq!(plan.phase_at(0.0), Some(0));
        assert_eq!(plan.phase_at(16.7), Some(0));
        assert_eq!(plan.phase_at(17.0), None);
        assert_eq!(plan.phase_at(20.0), Some(1));
        assert_eq!(plan.phase_at(99.9), None);
        // every movement gets at least one phase
        for d in Direction::ALL {
            for m in Movement::ALL {
                assert!(plan.green_for(d, m) > 0.0, "{d}{m:?}");
            }
        }
    }

    #[test]
    fn oversaturated_estimate_uses_longest_cycle() {
        let (est, y) = symmetric();
        let c = SignalController::new(CycleModel::default());
        let plan = c.plan(&est, &y, [7200.0; 4]).unwrap();
        assert_eq!(plan.cycle_s, 180.0);
    }
}
