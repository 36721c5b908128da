use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Classic Webster cycle `(1.5*T_l + 5) / (1 - Y)`.
pub fn webster_cycle(lost_time_s: f64, flow_ratio_sum: f64) -> Result<f64> {
    check_flow_ratio(flow_ratio_sum)?;
    Ok((1.5 * lost_time_s + 5.0) / (1.0 - flow_ratio_sum))
}

fn check_flow_ratio(y: f64) -> Result<()> {
    if !y.is_finite() || y < 0.0 {
        return Err(Error::InvalidInput(format!("flow ratio sum must be finite and nonnegative, got {y}")));
    }
    if y >= 1.0 {
        return Err(Error::Oversaturated(y));
    }
    Ok(())
}

/// Log-linear cycle model `T_c = a1 * ln(T_l / (1 - Y)) + a2`, snapped to a discrete cycle space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleModel {
    pub alpha1_s: f64,
    pub alpha2_s: f64,
    pub lost_time_s: f64,
    /// Ascending candidate cycles.
    pub cycle_space_s: Vec<f64>,
}

impl Default for CycleModel {
    fn default() -> Self {
        Self::new(136.8, -357.7, 16.0)
    }
}

pub fn default_cycle_space() -> Vec<f64> {
    (4..=18).map(|c| c as f64 * 10.0).collect()
}

impl CycleModel {
    pub fn new(alpha1_s: f64, alpha2_s: f64, lost_time_s: f64) -> Self {
        Self { alpha1_s, alpha2_s, lost_time_s, cycle_space_s: default_cycle_space() }
    }

    /// Regression abscissa `ln(T_l / (1 - Y))`.
    pub fn abscissa(lost_time_s: f64, flow_ratio_sum: f64) -> Result<f64> {
        check_flow_ratio(flow_ratio_sum)?;
        let arg = lost_time_s / (1.0 - flow_ratio_sum);
        if !(arg > 0.0) {
            return Err(Error::InvalidInput(format!("lost time must be positive, got {lost_time_s}")));
        }
        Ok(arg.ln())
    }

    /// Unsnapped model output.
    pub fn raw_cycle(&self, flow_ratio_sum: f64) -> Result<f64> {
        Ok(self.alpha1_s * Self::abscissa(self.lost_time_s, flow_ratio_sum)? + self.alpha2_s)
    }

    /// Model output snapped to the nearest candidate, ties going to the larger one.
    pub fn cycle(&self, flow_ratio_sum: f64) -> Result<f64> {
        Ok(self.snap(self.raw_cycle(flow_ratio_sum)?))
    }

    pub fn snap(&self, raw: f64) -> f64 {
        let space = &self.cycle_space_s;
        let mut best = space[0];
        for &c in space {
            // iterate ascending so equal distances resolve to the later (larger) value
            if (c - raw).abs() <= (best - raw).abs() {
                best = c;
            }
        }
        best
    }

    pub fn max_cycle(&self) -> f64 {
        *self.cycle_space_s.last().expect("cycle space is nonempty")
    }
}
