/// Per-pair learning rate `[1 / (1 + n(1 - gamma))]^0.8`.
pub fn learning_rate(pair_visits: u64, discount: f64) -> f64 {
    (1.0 / (1.0 + pair_visits as f64 * (1.0 - discount))).powf(0.8)
}

/// Parameters of the visit-count exploration rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplorationSchedule {
    pub floor: f64,
    /// Visits per available action that halve the exploration probability.
    pub visits_per_action: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self { floor: 0.05, visits_per_action: 4.0 }
    }
}

/// Exploration probability `max{floor, 1 / (1 + n(x) / (4 N_a))}`, where `n(x)`
/// counts the prior visits of the state.
pub fn exploration_prob(state_visits: u64, action_count: usize, schedule: ExplorationSchedule) -> f64 {
    let n_a = action_count.max(1) as f64;
    let raw = 1.0 / (1.0 + state_visits as f64 / (schedule.visits_per_action * n_a));
    raw.max(schedule.floor)
}
