use serde::{Deserialize, Serialize};

use crate::mesosim::RED_DURATIONS_S;
use crate::qcore::ActionKey;
use crate::{Error, Result};

pub const SPEED_LIMITS_KMH: [f64; 5] = [60.0, 70.0, 80.0, 90.0, 100.0];
pub const MIN_SPEED_KMH: f64 = 60.0;
pub const MAX_SPEED_KMH: f64 = 100.0;
pub const SPEED_STEP_KMH: f64 = 10.0;

/// Coordinated action for one section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtcAction {
    pub speed_limit_kmh: f64,
    pub red_s: f64,
    pub lc: bool,
}

impl FtcAction {
    pub const NEUTRAL: Self = Self { speed_limit_kmh: MAX_SPEED_KMH, red_s: 0.0, lc: false };

    /// Key components: speed reduction below the maximum, red-duration index, LC flag.
    /// The neutral action (full speed, no metering, no advisory) has the lowest key,
    /// so it wins ties.
    pub fn key(&self) -> ActionKey {
        ActionKey(vec![
            (MAX_SPEED_KMH - self.speed_limit_kmh).round() as i32,
            red_index(self.red_s).map_or(-1, |i| i as i32),
            i32::from(self.lc),
        ])
    }

    pub fn from_key(key: &ActionKey) -> Result<Self> {
        match key.0.as_slice() {
            [dv, red, lc] if (0..RED_DURATIONS_S.len() as i32).contains(red) && (0..=1).contains(lc) => {
                let v = MAX_SPEED_KMH - f64::from(*dv);
                if !SPEED_LIMITS_KMH.contains(&v) {
                    return Err(Error::InvalidInput(format!("action key {key} has speed {v}")));
                }
                Ok(Self { speed_limit_kmh: v, red_s: RED_DURATIONS_S[*red as usize], lc: *lc == 1 })
            }
            _ => Err(Error::InvalidInput(format!("malformed action key {key}"))),
        }
    }
}

fn red_index(red_s: f64) -> Option<usize> {
    RED_DURATIONS_S.iter().position(|r| (r - red_s).abs() < 1e-9)
}

/// Speed limits reachable from `previous` in one step.
pub fn speed_candidates(previous_kmh: f64) -> Vec<f64> {
    let lo = (previous_kmh - SPEED_STEP_KMH).max(MIN_SPEED_KMH);
    let hi = (previous_kmh + SPEED_STEP_KMH).min(MAX_SPEED_KMH);
    let mut v = vec![lo, previous_kmh, hi];
    v.dedup();
    v
}

/// Every coordinated action available after `previous` speed limit.
pub fn enumerate_actions(previous_kmh: f64) -> Result<Vec<FtcAction>> {
    if !SPEED_LIMITS_KMH.contains(&previous_kmh) {
        return Err(Error::InvalidInput(format!("previous speed limit {previous_kmh} is not a setting")));
    }
    let mut out = Vec::with_capacity(48);
    for v in speed_candidates(previous_kmh) {
        for red in RED_DURATIONS_S {
            for lc in [false, true] {
                out.push(FtcAction { speed_limit_kmh: v, red_s: red, lc });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_counts() {
        assert_eq!(enumerate_actions(80.0).unwrap().len(), 48);
        assert_eq!(enumerate_actions(60.0).unwrap().len(), 32);
        assert_eq!(enumerate_actions(100.0).unwrap().len(), 32);
        assert_eq!(speed_candidates(60.0), vec![60.0, 70.0]);
        assert_eq!(speed_candidates(100.0), vec![90.0, 100.0]);
        assert!(enumerate_actions(85.0).is_err());
    }

    #[test]
    fn keys_round_trip_and_neutral_sorts_first() {
        let all = enumerate_actions(90.0).unwrap();
        let mut keys: Vec<_> = all.iter().map(FtcAction::key).collect();
        for (a, k) in all.iter().zip(&keys) {
            assert_eq!(FtcAction::from_key(k).unwrap(), *a);
        }
        keys.sort();
        assert_eq!(FtcAction::from_key(&keys[0]).unwrap(), FtcAction::NEUTRAL);
    }
}
