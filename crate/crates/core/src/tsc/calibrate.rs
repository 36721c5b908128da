use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::cycle::CycleModel;
use crate::{Error, Result};

pub const TRAVEL_TIME_WEIGHT: f64 = 0.4;
pub const FUEL_WEIGHT: f64 = 0.3;
pub const EMISSION_WEIGHT: f64 = 0.3;

/// Weighted sum of travel time, fuel and emission relative to a base-case run.
pub fn performance_index(
    travel_time: f64,
    fuel: f64,
    emission: f64,
    base_travel_time: f64,
    base_fuel: f64,
    base_emission: f64,
) -> Result<f64> {
    if !(base_travel_time > 0.0 && base_fuel > 0.0 && base_emission > 0.0) {
        return Err(Error::InvalidInput("performance index base values must be positive".into()));
    }
    Ok(TRAVEL_TIME_WEIGHT * travel_time / base_travel_time
        + FUEL_WEIGHT * fuel / base_fuel
        + EMISSION_WEIGHT * emission / base_emission)
}

/// One (demand level, cycle) evaluation of the isolated-intersection sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub iteration: u32,
    pub demand_veh_h: f64,
    pub flow_ratio_sum: f64,
    pub cycle_s: f64,
    pub travel_time_s: f64,
    pub fuel_g: f64,
    pub emission_g_km: f64,
    pub base_travel_time_s: f64,
    pub base_fuel_g: f64,
    pub base_emission_g_km: f64,
    pub performance_index: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub alpha1_s: f64,
    pub alpha2_s: f64,
    pub r_squared: f64,
    /// `(ln(T_l / (1 - Y)), best cycle)` pairs the line was fitted to.
    pub points: Vec<(f64, f64)>,
}

impl CalibrationFit {
    pub fn model(&self, lost_time_s: f64) -> CycleModel {
        CycleModel::new(self.alpha1_s, self.alpha2_s, lost_time_s)
    }
}

/// Ordinary least squares `y = a1 * x + a2` with coefficient of determination.
pub fn fit_line(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::RankDeficient(format!("need at least 2 points, got {}", points.len())));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let scale = points.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
    if sxx <= 1e-12 * scale * scale * n {
        return Err(Error::RankDeficient("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok((slope, intercept, r2))
}

/// Picks the minimal-index cycle for each (iteration, demand) group, ties to the
/// larger cycle, and regresses best cycle on `ln(T_l / (1 - Y))`. Groups whose
/// `Y` lies outside `[0, 1)` are skipped since the model is undefined there.
pub fn calibrate_cycle_model(samples: &[CalibrationSample], lost_time_s: f64) -> Result<CalibrationFit> {
    let mut best: BTreeMap<(u32, u64), &CalibrationSample> = BTreeMap::new();
    for s in samples {
        let key = (s.iteration, s.demand_veh_h.to_bits());
        let replace = match best.get(&key) {
            None => true,
            Some(b) => {
                s.performance_index < b.performance_index
                    || (s.performance_index == b.performance_index && s.cycle_s > b.cycle_s)
            }
        };
        if replace {
            best.insert(key, s);
        }
    }
    let points: Vec<(f64, f64)> = best
        .values()
        .filter(|s| (0.0..1.0).contains(&s.flow_ratio_sum))
        .map(|s| Ok((CycleModel::abscissa(lost_time_s, s.flow_ratio_sum)?, s.cycle_s)))
        .collect::<Result<_>>()?;
    let (alpha1_s, alpha2_s, r_squared) = fit_line(&points)?;
    Ok(CalibrationFit { alpha1_s, alpha2_s, r_squared, points })
}

pub fn write_samples_csv<W: Write>(samples: &[CalibrationSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(input: R) -> Result<Vec<CalibrationSample>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { location: "csv".into(), message: format!("{other:?}") },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn performance_index_examples() {
        assert!((performance_index(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((performance_index(0.9, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap() - 0.96).abs() < 1e-12);
        assert!((performance_index(2.0, 2.0, 2.0, 1.0, 1.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(performance_index(1.0, 1.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn two_points_interpolate_exactly() {
        let (a, b, r2) = fit_line(&[(1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((a - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_abscissae_are_rank_deficient() {
        assert!(matches!(fit_line(&[(2.0, 1.0), (2.0, 3.0), (2.0, 4.0)]), Err(Error::RankDeficient(_))));
    }

    fn sample(iteration: u32, demand: f64, y: f64, cycle: f64, p: f64) -> CalibrationSample {
        CalibrationSample {
            iteration,
            demand_veh_h: demand,
            flow_ratio_sum: y,
            cycle_s: cycle,
            travel_time_s: p,
            fuel_g: p,
            emission_g_km: p,
            base_travel_time_s: 1.0,
            base_fuel_g: 1.0,
            base_emission_g_km: 1.0,
            performance_index: p,
        }
    }

    #[test]
    fn best_cycle_selection_prefers_larger_on_ties() {
        let samples = vec![
            sample(0, 400.0, 0.3, 60.0, 0.9),
            sample(0, 400.0, 0.3, 70.0, 0.9),
            sample(0, 400.0, 0.3, 80.0, 1.1),
            sample(0, 800.0, 0.6, 100.0, 0.8),
            sample(0, 800.0, 0.6, 90.0, 0.95),
            sample(0, 1600.0, 1.2, 180.0, 0.5),
        ];
        let fit = calibrate_cycle_model(&samples, 16.0).unwrap();
        assert_eq!(fit.points.len(), 2);
        assert_eq!(fit.points[0].1, 70.0);
        assert_eq!(fit.points[1].1, 100.0);
    }

    #[test]
    fn csv_round_trip() {
        let samples = vec![sample(1, 500.0, 0.4, 60.0, 1.0), sample(2, 600.0, 0.45, 70.0, 0.97)];
        let mut buf = Vec::new();
        write_samples_csv(&samples, &mut buf).unwrap();
        let back = read_samples_csv(buf.as_slice()).unwrap();
        assert_eq!(back, samples);
    }
}
