use serde::{Deserialize, Serialize};

use crate::netmodel::{Direction, Movement, TurnRatios};
use crate::{Error, Result};

/// Measured vehicle inputs of a corridor of `K` intersections ordered in the
/// freeway direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorridorInputs {
    /// Eastbound input at each intersection.
    pub east_veh_h: Vec<f64>,
    /// Westbound input at each intersection.
    pub west_veh_h: Vec<f64>,
    /// Southbound input entering intersection 1.
    pub south_boundary_veh_h: f64,
    /// Northbound input entering intersection K.
    pub north_boundary_veh_h: f64,
}

impl CorridorInputs {
    pub fn zeros(k: usize) -> Self {
        Self { east_veh_h: vec![0.0; k], west_veh_h: vec![0.0; k], south_boundary_veh_h: 0.0, north_boundary_veh_h: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.east_veh_h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.east_veh_h.is_empty()
    }
}

/// Estimated approach demands of one intersection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DemandEstimate {
    pub east: f64,
    pub south: f64,
    pub west: f64,
    pub north: f64,
}

impl DemandEstimate {
    pub fn get(&self, dir: Direction) -> f64 {
        match dir {
            Direction::East => self.east,
            Direction::South => self.south,
            Direction::West => self.west,
            Direction::North => self.north,
        }
    }

    pub fn total(&self) -> f64 {
        self.east + self.south + self.west + self.north
    }
}

/// Propagates corridor inputs through the intersections: Southbound in one forward
/// pass, Northbound in one backward pass. `offramp_means[k]` is the historical mean
/// flow of the off-ramp feeding the Westbound approach of intersection `k` (0 if none).
pub fn estimate_demands(
    inputs: &CorridorInputs,
    turn_ratios: &[TurnRatios],
    offramp_means: &[f64],
) -> Result<Vec<DemandEstimate>> {
    let k = inputs.len();
    if k == 0 || inputs.west_veh_h.len() != k || turn_ratios.len() != k || offramp_means.len() != k {
        return Err(Error::InvalidInput(format!(
            "corridor inputs disagree on intersection count: east {}, west {}, ratios {}, off-ramps {}",
            k,
            inputs.west_veh_h.len(),
            turn_ratios.len(),
            offramp_means.len()
        )));
    }
    let mut est = vec![DemandEstimate::default(); k];
    for j in 0..k {
        est[j].west = inputs.west_veh_h[j] + offramp_means[j];
        est[j].east = inputs.east_veh_h[j];
    }
    est[0].south = inputs.south_boundary_veh_h;
    for j in 1..k {
        let y = &turn_ratios[j - 1];
        let p = est[j - 1];
        est[j].south = y.get(Direction::West, Movement::Left) * p.west
            + y.get(Direction::East, Movement::Right) * p.east
            + y.get(Direction::South, Movement::Through) * p.south;
    }
    est[k - 1].north = inputs.north_boundary_veh_h;
    for j in (0..k - 1).rev() {
        let y = &turn_ratios[j + 1];
        let n = est[j + 1];
        est[j].north = y.get(Direction::West, Movement::Right) * n.west
            + y.get(Direction::East, Movement::Left) * n.east
            + y.get(Direction::North, Movement::Through) * n.north;
    }
    Ok(est)
}

/// Turning fractions of one approach from its movement flow means `(l, t, r)`.
pub fn estimate_turn_ratios(left: f64, through: f64, right: f64) -> Result<[f64; 3]> {
    if [left, through, right].iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::InvalidInput("movement flow means must be finite and nonnegative".into()));
    }
    let total = left + through + right;
    if !(total > 0.0) {
        return Err(Error::InvalidInput("all movement flow means are zero".into()));
    }
    Ok([left / total, through / total, right / total])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_intersection_uses_boundaries() {
        let mut inputs = CorridorInputs::zeros(1);
        inputs.south_boundary_veh_h = 500.0;
        inputs.north_boundary_veh_h = 700.0;
        let est = estimate_demands(&inputs, &[TurnRatios::uniform(0.25, 0.5, 0.25)], &[0.0]).unwrap();
        assert_eq!(est[0].south, 500.0);
        assert_eq!(est[0].north, 700.0);
    }

    #[test]
    fn southbound_propagates_forward() {
        let third = 1.0 / 3.0;
        let y = TurnRatios::uniform(third, third, third);
        let inputs = CorridorInputs {
            east_veh_h: vec![900.0, 0.0],
            west_veh_h: vec![900.0, 0.0],
            south_boundary_veh_h: 900.0,
            north_boundary_veh_h: 0.0,
        };
        let est = estimate_demands(&inputs, &[y, y], &[0.0, 0.0]).unwrap();
        assert!((est[1].south - 900.0).abs() < 1e-9);
    }

    #[test]
    fn offramp_mean_adds_to_westbound() {
        let y = TurnRatios::uniform(0.25, 0.5, 0.25);
        let mut inputs = CorridorInputs::zeros(3);
        inputs.west_veh_h[2] = 500.0;
        let est = estimate_demands(&inputs, &[y; 3], &[0.0, 0.0, 400.0]).unwrap();
        assert_eq!(est[2].west, 900.0);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let y = TurnRatios::uniform(0.25, 0.5, 0.25);
        assert!(estimate_demands(&CorridorInputs::zeros(2), &[y], &[0.0, 0.0]).is_err());
        assert!(estimate_demands(&CorridorInputs::zeros(0), &[], &[]).is_err());
    }

    #[test]
    fn turn_ratio_examples() {
        assert_eq!(estimate_turn_ratios(100.0, 200.0, 100.0).unwrap(), [0.25, 0.5, 0.25]);
        assert_eq!(estimate_turn_ratios(0.0, 40.0, 0.0).unwrap(), [0.0, 1.0, 0.0]);
        assert!(estimate_turn_ratios(0.0, 0.0, 0.0).is_err());
    }
}
