use serde::{Deserialize, Serialize};

use crate::netmodel::{Direction, Intersection, Movement};
use crate::tsc::{phase_serves, SignalPlan, PHASES};

/// Lanes used by the left, through and right movements of an approach.
pub fn movement_lanes(approach_lanes: u32) -> [f64; 3] {
    let total = f64::from(approach_lanes.max(3));
    [1.0, total - 2.0, 1.0]
}

/// Queued vehicles by movement on one approach.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ApproachQueueState {
    pub queued_veh: [f64; 3],
}

impl ApproachQueueState {
    pub fn total(&self) -> f64 {
        self.queued_veh.iter().sum()
    }

    /// Longest movement queue in metres.
    pub fn length_m(&self, approach_lanes: u32, spacing_m: f64) -> f64 {
        let lanes = movement_lanes(approach_lanes);
        self.queued_veh.iter().zip(lanes).map(|(q, l)| q * spacing_m / l).fold(0.0, f64::max)
    }

    pub fn add_split(&mut self, veh: f64, ratios: [f64; 3]) {
        for (q, y) in self.queued_veh.iter_mut().zip(ratios) {
            *q += veh * y;
        }
    }
}

/// Signal state and queues of one intersection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionState {
    pub approaches: [ApproachQueueState; 4],
    pub plan: SignalPlan,
    pub cycle_start_s: f64,
}

impl IntersectionState {
    pub fn new(plan: SignalPlan, t_s: f64) -> Self {
        Self { approaches: [ApproachQueueState::default(); 4], plan, cycle_start_s: t_s }
    }

    /// Switches to `next` once the running cycle has completed.
    pub fn roll_cycle(&mut self, t_s: f64, next: &SignalPlan) {
        while t_s >= self.cycle_start_s + self.plan.cycle_s - 1e-9 {
            self.cycle_start_s += self.plan.cycle_s;
            if self.plan != *next {
                self.plan = next.clone();
            }
        }
    }

    /// Seconds of green each phase shows within `[t0, t1)`, clipped to the running cycle.
    pub fn phase_overlap(&self, t0_s: f64, t1_s: f64) -> [f64; PHASES] {
        let a = t0_s - self.cycle_start_s;
        let b = (t1_s - self.cycle_start_s).min(self.plan.cycle_s);
        let transition = self.plan.lost_time_s / PHASES as f64;
        let mut start = 0.0;
        let mut out = [0.0; PHASES];
        for (j, o) in out.iter_mut().enumerate() {
            let g = self.plan.green_s[j];
            *o = (b.min(start + g) - a.max(start)).max(0.0);
            start += g + transition;
        }
        out
    }

    /// Seconds of green for `(dir, mov)` within `[t0, t1)`, clipped to the running cycle.
    pub fn green_overlap(&self, t0_s: f64, t1_s: f64, dir: Direction, mov: Movement) -> f64 {
        let phases = self.phase_overlap(t0_s, t1_s);
        (0..PHASES).filter(|&j| phase_serves(j, dir, mov)).map(|j| phases[j]).sum()
    }

    pub fn queue_m(&self, ix: &Intersection, dir: Direction, spacing_m: f64) -> f64 {
        self.approaches[dir.index()].length_m(ix.approach_lanes[dir.index()], spacing_m)
    }

    pub fn total_queued(&self) -> f64 {
        self.approaches.iter().map(ApproachQueueState::total).sum()
    }

    /// Vehicles each movement could discharge during `[t, t + dt)`.
    ///
    /// A phase group discharges at saturation flow while green, shared among the
    /// movements it serves in proportion to their queues. Flow ratios are defined
    /// per phase group, so a plan whose cycle is at least `T_l / (1 - Y)` serves
    /// every movement's demand.
    pub fn discharge_capacity(&self, ix: &Intersection, t_s: f64, dt_s: f64) -> [[f64; 3]; 4] {
        let mut cap = [[0.0; 3]; 4];
        let phases = self.phase_overlap(t_s, t_s + dt_s);
        for (j, g) in phases.into_iter().enumerate().filter(|(_, g)| *g > 0.0) {
            let served: Vec<(Direction, Movement)> = Direction::ALL
                .into_iter()
                .flat_map(|d| Movement::ALL.map(|m| (d, m)))
                .filter(|&(d, m)| phase_serves(j, d, m))
                .collect();
            let queue = |d: Direction, m: Movement| self.approaches[d.index()].queued_veh[m.index()];
            let competing: f64 = served.iter().map(|&(d, m)| queue(d, m)).sum();
            for &(d, m) in &served {
                let share = if competing > 0.0 { queue(d, m) / competing } else { 1.0 / served.len() as f64 };
                cap[d.index()][m.index()] += ix.saturation_flow_veh_h[d.index()] * g / 3600.0 * share;
            }
        }
        cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lanes() {
        assert_eq!(movement_lanes(4), [1.0, 2.0, 1.0]);
        assert_eq!(movement_lanes(2), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn phase_group_shares_saturation() {
        let ix = Intersection::default();
        // t in [0, 1): phase 1, every southbound movement
        let plan = SignalPlan { cycle_s: 100.0, green_s: [20.0, 20.0, 10.0, 20.0, 14.0], lost_time_s: 16.0, offset_s: 0.0 };
        let mut st = IntersectionState::new(plan, 0.0);
        st.approaches[Direction::South.index()].queued_veh = [1.0, 2.0, 1.0];
        st.approaches[Direction::East.index()].queued_veh = [3.0, 0.0, 0.0];
        let cap = st.discharge_capacity(&ix, 0.0, 1.0);
        let s: f64 = cap[Direction::South.index()].iter().sum();
        assert!((s - 2.0).abs() < 1e-12);
        assert!((cap[Direction::South.index()][1] - 1.0).abs() < 1e-12);
        assert_eq!(cap[Direction::East.index()], [0.0; 3]);
        // phase 5 (E/W left) starts at 20 + 20 + 10 + 20 + 4 * 3.2
        st.approaches[Direction::West.index()].queued_veh = [1.0, 0.0, 0.0];
        let cap = st.discharge_capacity(&ix, 83.0, 1.0);
        assert!((cap[Direction::East.index()][0] - 1.5).abs() < 1e-12);
        assert!((cap[Direction::West.index()][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn queue_length_uses_longest_movement() {
        let q = ApproachQueueState { queued_veh: [2.0, 6.0, 1.0] };
        assert!((q.length_m(4, 7.5) - 22.5).abs() < 1e-12);
    }

    #[test]
    fn green_overlap_sums_to_phase_green() {
        let plan = SignalPlan { cycle_s: 100.0, green_s: [10.0, 20.0, 10.0, 30.0, 14.0], lost_time_s: 16.0, offset_s: 0.0 };
        let st = IntersectionState::new(plan.clone(), 0.0);
        for dir in Direction::ALL {
            for mov in Movement::ALL {
                let g: f64 = (0..100).map(|t| st.green_overlap(t as f64, t as f64 + 1.0, dir, mov)).sum();
                assert!((g - plan.green_for(dir, mov)).abs() < 1e-9, "{dir:?} {mov:?}");
            }
        }
    }

    #[test]
    fn plan_switches_only_at_boundary() {
        let a = SignalPlan::uniform(60.0, 16.0);
        let b = SignalPlan::uniform(90.0, 16.0);
        let mut st = IntersectionState::new(a.clone(), 0.0);
        st.roll_cycle(30.0, &b);
        assert_eq!(st.plan, a);
        st.roll_cycle(60.0, &b);
        assert_eq!(st.plan, b);
        assert_eq!(st.cycle_start_s, 60.0);
    }
}
