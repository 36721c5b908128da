use std::fmt;

use serde::{Deserialize, Serialize};

use super::fd::FundamentalDiagram;

/// Travel direction of an arterial approach (the direction vehicles are heading).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    East,
    South,
    West,
    North,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::East, Direction::South, Direction::West, Direction::North];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Heading after performing `movement` from this direction (right-hand traffic).
    pub fn after(self, movement: Movement) -> Direction {
        use Direction::*;
        match (self, movement) {
            (d, Movement::Through) => d,
            (East, Movement::Left) | (West, Movement::Right) => North,
            (East, Movement::Right) | (West, Movement::Left) => South,
            (South, Movement::Left) | (North, Movement::Right) => East,
            (South, Movement::Right) | (North, Movement::Left) => West,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Direction::East => "E",
            Direction::South => "S",
            Direction::West => "W",
            Direction::North => "N",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Movement {
    Left,
    Through,
    Right,
}

impl Movement {
    pub const ALL: [Movement; 3] = [Movement::Left, Movement::Through, Movement::Right];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Turning fractions `y^{dir,mov}` for the four approaches of one intersection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnRatios {
    /// Indexed `[direction][movement]` in (E, S, W, N) x (l, t, r) order.
    pub ratios: [[f64; 3]; 4],
}

impl TurnRatios {
    pub fn uniform(left: f64, through: f64, right: f64) -> Self {
        Self { ratios: [[left, through, right]; 4] }
    }

    pub fn get(&self, dir: Direction, mov: Movement) -> f64 {
        self.ratios[dir.index()][mov.index()]
    }

    pub fn approach(&self, dir: Direction) -> [f64; 3] {
        self.ratios[dir.index()]
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for dir in Direction::ALL {
            let r = self.approach(dir);
            if r.iter().any(|y| !(0.0..=1.0).contains(y)) {
                out.push(format!("turn ratio of approach {dir} outside [0, 1]: {r:?}"));
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                out.push(format!("turn ratios of approach {dir} sum to {sum}"));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RampKind {
    On,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub kind: RampKind,
    pub storage_length_m: f64,
    /// Zero-based index of the arterial intersection the ramp connects to.
    pub connecting_intersection: usize,
    /// Long-run mean off-ramp flow; zero for on-ramps.
    pub historical_mean_offramp_flow_veh_h: f64,
    /// Share of the mainline flow leaving through this off-ramp; zero for on-ramps.
    pub exit_ratio: f64,
}

impl RampSpec {
    pub fn on(intersection: usize) -> Self {
        Self {
            kind: RampKind::On,
            storage_length_m: 300.0,
            connecting_intersection: intersection,
            historical_mean_offramp_flow_veh_h: 0.0,
            exit_ratio: 0.0,
        }
    }

    pub fn off(intersection: usize, exit_ratio: f64) -> Self {
        Self {
            kind: RampKind::Off,
            storage_length_m: 300.0,
            connecting_intersection: intersection,
            historical_mean_offramp_flow_veh_h: 0.0,
            exit_ratio,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreewaySection {
    pub length_km: f64,
    pub lane_count: u32,
    pub onramp: Option<RampSpec>,
    pub offramp: Option<RampSpec>,
    pub fd: FundamentalDiagram,
    pub paired_intersection: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    /// Lanes per approach, (E, S, W, N).
    pub approach_lanes: [u32; 4],
    /// Saturation flow per approach, (E, S, W, N).
    pub saturation_flow_veh_h: [f64; 4],
    pub turn_ratios: TurnRatios,
    /// Link length towards the next intersection in the freeway direction.
    pub link_length_m: f64,
}

impl Default for Intersection {
    fn default() -> Self {
        Self {
            approach_lanes: [4; 4],
            saturation_flow_veh_h: [7200.0; 4],
            turn_ratios: TurnRatios::uniform(0.25, 0.5, 0.25),
            link_length_m: 1500.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    /// Uncontrolled-by-agent stretch upstream of section 1 that hosts the upstream speed limit.
    pub upstream_zone_km: f64,
    /// Target cell length of the transmission scheme.
    pub cell_length_km: f64,
    pub sections: Vec<FreewaySection>,
    pub intersections: Vec<Intersection>,
    /// Fraction of the eastward intersection outflow that joins the on-ramp.
    pub onramp_share: f64,
    pub arterial_speed_kmh: f64,
    pub vehicle_spacing_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IssueKind {
    FundamentalDiagram,
    Geometry,
    Connectivity,
    TurnRatios,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationIssue {
    pub kind: IssueKind,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    fn push(&mut self, kind: IssueKind, message: String) {
        self.issues.push(ValidationIssue { kind, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{:?}: {}", issue.kind, issue.message)?;
        }
        Ok(())
    }
}

/// Lists every violated network invariant. An empty report means the network is usable.
pub fn validate_topology(net: &NetworkTopology) -> ValidationReport {
    let mut report = ValidationReport::default();
    let k = net.intersections.len();
    if net.sections.is_empty() {
        report.push(IssueKind::Geometry, "network has no freeway sections".into());
    }
    if !(net.cell_length_km > 0.0) {
        report.push(IssueKind::Geometry, "cell length must be positive".into());
    }
    if !(net.upstream_zone_km >= 0.0) {
        report.push(IssueKind::Geometry, "upstream zone length must be nonnegative".into());
    }
    if !(0.0..=1.0).contains(&net.onramp_share) {
        report.push(IssueKind::Geometry, format!("on-ramp share {} outside [0, 1]", net.onramp_share));
    }
    for (i, s) in net.sections.iter().enumerate() {
        for msg in s.fd.consistency_violations() {
            report.push(IssueKind::FundamentalDiagram, format!("section {}: {msg}", i + 1));
        }
        if !(s.length_km > 0.0) {
            report.push(IssueKind::Geometry, format!("section {}: length must be positive", i + 1));
        }
        if s.lane_count < 2 {
            report.push(IssueKind::Geometry, format!("section {}: needs at least 2 lanes", i + 1));
        }
        if let Some(p) = s.paired_intersection {
            if p >= k {
                report.push(
                    IssueKind::Connectivity,
                    format!("section {} paired with missing intersection {}", i + 1, p + 1),
                );
            }
        }
        for (ramp, expected) in [(&s.onramp, RampKind::On), (&s.offramp, RampKind::Off)] {
            let Some(r) = ramp else { continue };
            if r.kind != expected {
                report.push(IssueKind::Connectivity, format!("section {}: ramp kind mismatch", i + 1));
            }
            if r.connecting_intersection >= k {
                report.push(
                    IssueKind::Connectivity,
                    format!(
                        "section {}: {:?}-ramp references missing intersection {}",
                        i + 1,
                        r.kind,
                        r.connecting_intersection + 1
                    ),
                );
            }
            if !(r.storage_length_m > 0.0) {
                report.push(IssueKind::Geometry, format!("section {}: ramp storage must be positive", i + 1));
            }
            if !(0.0..1.0).contains(&r.exit_ratio) {
                report.push(IssueKind::Geometry, format!("section {}: exit ratio outside [0, 1)", i + 1));
            }
        }
    }
    for (j, ix) in net.intersections.iter().enumerate() {
        for msg in ix.turn_ratios.violations() {
            report.push(IssueKind::TurnRatios, format!("intersection {}: {msg}", j + 1));
        }
        if ix.saturation_flow_veh_h.iter().any(|q| !(*q > 0.0)) {
            report.push(IssueKind::Geometry, format!("intersection {}: saturation flow must be positive", j + 1));
        }
        if !(ix.link_length_m > 0.0) {
            report.push(IssueKind::Geometry, format!("intersection {}: link length must be positive", j + 1));
        }
    }
    report
}

impl NetworkTopology {
    /// Six-section, five-lane corridor with five on-ramps, six off-ramps and seven
    /// parallel intersections. Section `i` pairs with intersection `i`.
    pub fn i710_corridor(fd: FundamentalDiagram) -> Self {
        let lengths = [1.5, 1.7, 1.6, 1.6, 1.7, 1.5];
        let sections = lengths
            .iter()
            .enumerate()
            .map(|(i, &length_km)| FreewaySection {
                length_km,
                lane_count: 5,
                onramp: (i < 5).then(|| RampSpec::on(i)),
                offramp: Some(RampSpec::off(i, DEFAULT_EXIT_RATIO)),
                fd,
                paired_intersection: Some(i),
            })
            .collect();
        Self {
            upstream_zone_km: 4.0,
            cell_length_km: 0.4,
            sections,
            intersections: vec![Intersection::default(); 7],
            onramp_share: DEFAULT_ONRAMP_SHARE,
            arterial_speed_kmh: 50.0,
            vehicle_spacing_m: 7.5,
        }
    }

    /// One freeway section with an on-ramp, an off-ramp and one adjacent intersection.
    pub fn single_section(fd: FundamentalDiagram) -> Self {
        Self {
            upstream_zone_km: 2.0,
            cell_length_km: 0.4,
            sections: vec![FreewaySection {
                length_km: 1.6,
                lane_count: 5,
                onramp: Some(RampSpec::on(0)),
                offramp: Some(RampSpec::off(0, DEFAULT_EXIT_RATIO)),
                fd,
                paired_intersection: Some(0),
            }],
            intersections: vec![Intersection::default()],
            onramp_share: DEFAULT_ONRAMP_SHARE,
            arterial_speed_kmh: 50.0,
            vehicle_spacing_m: 7.5,
        }
    }

    pub fn total_length_km(&self) -> f64 {
        self.upstream_zone_km + self.sections.iter().map(|s| s.length_km).sum::<f64>()
    }

    /// Distance from the start of section 1 to the downstream end of `section`.
    pub fn distance_to_section_end_km(&self, section: usize) -> f64 {
        self.sections[..=section].iter().map(|s| s.length_km).sum()
    }

    pub fn onramp_count(&self) -> usize {
        self.sections.iter().filter(|s| s.onramp.is_some()).count()
    }
}

pub const DEFAULT_EXIT_RATIO: f64 = 0.08;
pub const DEFAULT_ONRAMP_SHARE: f64 = 0.8;
