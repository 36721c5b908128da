use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const REL_TOL: f64 = 1e-9;

/// Triangular flow-density law of one freeway section (all lanes together),
/// with a separate congested outflow branch and a capacity-drop fraction.
///
/// The three branches meet at the critical density:
/// `vf * rho_c == w * (rho_j - rho_c) == w_out * (rho_j_out - rho_c) == C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalDiagram {
    pub capacity_veh_h: f64,
    pub free_flow_speed_kmh: f64,
    pub backward_wave_kmh: f64,
    pub outflow_wave_kmh: f64,
    pub critical_density_veh_km: f64,
    pub jam_density_veh_km: f64,
    pub outflow_jam_density_veh_km: f64,
    pub capacity_drop: f64,
}

impl Default for FundamentalDiagram {
    fn default() -> Self {
        Self::from_capacity(10_000.0, 100.0, 25.0, 30.0, 0.15)
            .expect("default fundamental diagram is consistent")
    }
}

impl FundamentalDiagram {
    /// Builds a diagram from capacity and wave speeds; densities follow from
    /// the branch identities.
    pub fn from_capacity(
        capacity_veh_h: f64,
        free_flow_speed_kmh: f64,
        backward_wave_kmh: f64,
        outflow_wave_kmh: f64,
        capacity_drop: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("capacity_veh_h", capacity_veh_h),
            ("free_flow_speed_kmh", free_flow_speed_kmh),
            ("backward_wave_kmh", backward_wave_kmh),
            ("outflow_wave_kmh", outflow_wave_kmh),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        let rho_c = capacity_veh_h / free_flow_speed_kmh;
        let fd = Self {
            capacity_veh_h,
            free_flow_speed_kmh,
            backward_wave_kmh,
            outflow_wave_kmh,
            critical_density_veh_km: rho_c,
            jam_density_veh_km: rho_c + capacity_veh_h / backward_wave_kmh,
            outflow_jam_density_veh_km: rho_c + capacity_veh_h / outflow_wave_kmh,
            capacity_drop,
        };
        let issues = fd.consistency_violations();
        if issues.is_empty() {
            Ok(fd)
        } else {
            Err(Error::InvalidInput(issues.join("; ")))
        }
    }

    /// Every broken invariant, as human-readable lines. Empty when consistent.
    pub fn consistency_violations(&self) -> Vec<String> {
        let c = self.capacity_veh_h;
        let mut out = Vec::new();
        let close = |a: f64| (a - c).abs() <= REL_TOL * c.abs().max(1.0);
        let free = self.free_flow_speed_kmh * self.critical_density_veh_km;
        if !close(free) {
            out.push(format!("vf*rho_c = {free} differs from C = {c}"));
        }
        let back = self.backward_wave_kmh * (self.jam_density_veh_km - self.critical_density_veh_km);
        if !close(back) {
            out.push(format!("w*(rho_j - rho_c) = {back} differs from C = {c}"));
        }
        let outflow =
            self.outflow_wave_kmh * (self.outflow_jam_density_veh_km - self.critical_density_veh_km);
        if !close(outflow) {
            out.push(format!("w~*(rho~_j - rho_c) = {outflow} differs from C = {c}"));
        }
        if !(self.capacity_drop > 0.0 && self.capacity_drop < 1.0) {
            out.push(format!("capacity drop {} outside (0, 1)", self.capacity_drop));
        }
        if self.critical_density_veh_km >= self.jam_density_veh_km {
            out.push("critical density must be below jam density".into());
        }
        if self.critical_density_veh_km >= self.outflow_jam_density_veh_km {
            out.push("critical density must be below outflow jam density".into());
        }
        out
    }

    /// Highest flow a speed limit `v` admits: `v*w*rho_j / (v + w)`.
    pub fn capacity_under_limit(&self, speed_limit_kmh: f64) -> f64 {
        let w = self.backward_wave_kmh;
        speed_limit_kmh * w * self.jam_density_veh_km / (speed_limit_kmh + w)
    }

    /// Density at which the free branch under `v` meets the congested branch.
    pub fn critical_density_under_limit(&self, speed_limit_kmh: f64) -> f64 {
        self.capacity_under_limit(speed_limit_kmh) / speed_limit_kmh
    }

    /// Outflow a section can send at `density` under `speed_limit`, including the
    /// congested outflow branch: `min(v*rho, Q(v), w~*(rho~_j - rho))`, floored at 0.
    pub fn sending_flow(&self, density_veh_km: f64, speed_limit_kmh: f64) -> Result<f64> {
        if !(density_veh_km >= 0.0) {
            return Err(Error::InvalidInput(format!("negative density {density_veh_km}")));
        }
        if !(speed_limit_kmh > 0.0) || speed_limit_kmh > self.free_flow_speed_kmh + 1e-9 {
            return Err(Error::InvalidInput(format!(
                "speed limit {speed_limit_kmh} outside (0, {}]",
                self.free_flow_speed_kmh
            )));
        }
        let congested =
            self.outflow_wave_kmh * (self.outflow_jam_density_veh_km - density_veh_km);
        let flow = (speed_limit_kmh * density_veh_km)
            .min(self.capacity_under_limit(speed_limit_kmh))
            .min(congested);
        Ok(flow.max(0.0))
    }

    /// Cell demand used by the transmission scheme: `min(v*rho, Q(v))`.
    pub(crate) fn demand(&self, density_veh_km: f64, speed_limit_kmh: f64) -> f64 {
        (speed_limit_kmh * density_veh_km).min(self.capacity_under_limit(speed_limit_kmh))
    }

    /// Cell supply: `min(Q(v), w*(rho_j - rho))`, floored at 0.
    pub(crate) fn supply(&self, density_veh_km: f64, speed_limit_kmh: f64) -> f64 {
        let back = self.backward_wave_kmh * (self.jam_density_veh_km - density_veh_km);
        back.min(self.capacity_under_limit(speed_limit_kmh)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let fd = FundamentalDiagram::default();
        assert_eq!(fd.critical_density_veh_km, 100.0);
        assert_eq!(fd.jam_density_veh_km, 500.0);
        assert!((fd.outflow_jam_density_veh_km - 433.333_333_333).abs() < 1e-6);
        assert!(fd.consistency_violations().is_empty());
    }

    #[test]
    fn sending_flow_examples() {
        let fd = FundamentalDiagram::default();
        assert_eq!(fd.sending_flow(0.0, 100.0).unwrap(), 0.0);
        assert!((fd.sending_flow(100.0, 100.0).unwrap() - 10_000.0).abs() < 1e-9);
        // capacity under 60 km/h: 60*25*500/85
        let cap60: f64 = 60.0 * 25.0 * 500.0 / 85.0;
        assert!((fd.capacity_under_limit(60.0) - cap60).abs() < 1e-9);
        assert!((cap60 - 8823.529_411_764_7).abs() < 1e-6);
        assert!((fd.sending_flow(140.0, 60.0).unwrap() - 8400.0).abs() < 1e-9);
        // outflow branch binds: 30 * (433.33 - 200) = 7000
        assert!((fd.sending_flow(200.0, 60.0).unwrap() - 7000.0).abs() < 1e-6);
        assert_eq!(fd.sending_flow(480.0, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn sending_flow_rejects_bad_inputs() {
        let fd = FundamentalDiagram::default();
        assert!(fd.sending_flow(-1.0, 100.0).is_err());
        assert!(fd.sending_flow(10.0, 0.0).is_err());
        assert!(fd.sending_flow(10.0, 120.0).is_err());
    }

    #[test]
    fn inconsistent_diagram_is_reported() {
        let mut fd = FundamentalDiagram::default();
        fd.jam_density_veh_km = 450.0;
        let issues = fd.consistency_violations();
        assert_eq!(issues.len(), 1);
        assert!(issues[0].contains("w*(rho_j - rho_c)"));
    }
}
