use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::Rng;

use super::schedule::{exploration_prob, learning_rate, ExplorationSchedule};
use crate::{Error, Result};

/// Discretized state: an ordered tuple of bin values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(pub Vec<i32>);

/// Discretized action: an ordered tuple of component values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionKey(pub Vec<i32>);

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for ActionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairRecord {
    pub q: f64,
    pub visits: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateRecord {
    pub visits: u64,
    pub actions: BTreeMap<ActionKey, PairRecord>,
}

/// How an action is chosen from a candidate set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SelectionMode {
    /// Argmax with ties going to the lowest action key.
    Greedy,
    /// Visit-count adaptive exploration.
    Train(ExplorationSchedule),
    /// Explore with a fixed probability.
    FixedExploration(f64),
}

/// Sparse Q-table. Pairs never updated read as `Q = 0` with zero visits.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    discount: f64,
    states: HashMap<StateKey, StateRecord>,
}

impl QTable {
    pub fn new(discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidInput(format!("discount must lie in [0, 1), got {discount}")));
        }
        Ok(Self { discount, states: HashMap::new() })
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn q(&self, x: &StateKey, a: &ActionKey) -> f64 {
        self.pair(x, a).q
    }

    pub fn pair_visits(&self, x: &StateKey, a: &ActionKey) -> u64 {
        self.pair(x, a).visits
    }

    pub fn state_visits(&self, x: &StateKey) -> u64 {
        self.states.get(x).map_or(0, |s| s.visits)
    }

    fn pair(&self, x: &StateKey, a: &ActionKey) -> PairRecord {
        self.states.get(x).and_then(|s| s.actions.get(a)).copied().unwrap_or_default()
    }

    pub fn state(&self, x: &StateKey) -> Option<&StateRecord> {
        self.states.get(x)
    }

    pub fn states(&self) -> impl Iterator<Item = (&StateKey, &StateRecord)> {
        self.states.iter()
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn pair_count(&self) -> usize {
        self.states.values().map(|s| s.actions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `max_a Q(x, a)`. Unvisited actions read as 0 and stored values are never
    /// negative for rewards in `[0, 1]`, so the maximum is taken together with 0.
    pub fn max_q(&self, x: &StateKey) -> f64 {
        self.states
            .get(x)
            .map_or(0.0, |s| s.actions.values().map(|p| p.q).fold(0.0, f64::max))
    }

    /// One Q-learning step on `(x, a, r, x')`; returns `|dQ|`.
    pub fn update(&mut self, x: &StateKey, a: &ActionKey, reward: f64, next: &StateKey) -> Result<f64> {
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::InvalidInput(format!("reward {reward} outside [0, 1]")));
        }
        let target = reward + self.discount * self.max_q(next);
        let discount = self.discount;
        let state = self.states.entry(x.clone()).or_default();
        let pair = state.actions.entry(a.clone()).or_default();
        let eta = learning_rate(pair.visits, discount);
        let delta = eta * (target - pair.q);
        pair.q += delta;
        pair.visits += 1;
        state.visits += 1;
        Ok(delta.abs())
    }

    /// Highest-valued candidate, ties broken by lowest key.
    pub fn greedy<'a>(&self, x: &StateKey, candidates: &'a [ActionKey]) -> Option<&'a ActionKey> {
        let record = self.states.get(x);
        let value = |a: &ActionKey| record.and_then(|s| s.actions.get(a)).map_or(0.0, |p| p.q);
        let mut best: Option<(&ActionKey, f64)> = None;
        for a in candidates {
            let v = value(a);
            best = match best {
                None => Some((a, v)),
                Some((b, bv)) if v > bv || (v == bv && a < b) => Some((a, v)),
                keep => keep,
            };
        }
        best.map(|(a, _)| a)
    }

    pub fn select_action<'a, R: Rng + ?Sized>(
        &self,
        x: &StateKey,
        candidates: &'a [ActionKey],
        rng: &mut R,
        mode: SelectionMode,
    ) -> Result<&'a ActionKey> {
        if candidates.is_empty() {
            return Err(Error::InvalidInput("empty candidate action set".into()));
        }
        let explore = match mode {
            SelectionMode::Greedy => 0.0,
            SelectionMode::Train(schedule) => {
                exploration_prob(self.state_visits(x), candidates.len(), schedule)
            }
            SelectionMode::FixedExploration(p) => p,
        };
        if explore > 0.0 && rng.random::<f64>() < explore {
            return Ok(&candidates[rng.random_range(0..candidates.len())]);
        }
        Ok(self.greedy(x, candidates).expect("candidates nonempty"))
    }

    pub(crate) fn from_parts(discount: f64, states: HashMap<StateKey, StateRecord>) -> Self {
        Self { discount, states }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn s(v: i32) -> StateKey {
        StateKey(vec![v])
    }
    fn a(v: i32) -> ActionKey {
        ActionKey(vec![v])
    }

    #[test]
    fn fresh_pair_takes_full_reward() {
        let mut t = QTable::new(0.0).unwrap();
        let d = t.update(&s(0), &a(0), 0.7, &s(1)).unwrap();
        assert!((t.q(&s(0), &a(0)) - 0.7).abs() < 1e-15);
        assert!((d - 0.7).abs() < 1e-15);
        assert_eq!(t.pair_visits(&s(0), &a(0)), 1);
        assert_eq!(t.state_visits(&s(0)), 1);
    }

    #[test]
    fn bootstrap_from_next_state() {
        let mut t = QTable::new(0.9).unwrap();
        // give the next state a best value of 1.0
        let mut helper = QTable::new(0.0).unwrap();
        helper.update(&s(1), &a(3), 1.0, &s(9)).unwrap();
        t.states = helper.states.clone();
        t.update(&s(0), &a(0), 0.5, &s(1)).unwrap();
        assert!((t.q(&s(0), &a(0)) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn zero_reward_keeps_zero() {
        let mut t = QTable::new(0.5).unwrap();
        let d = t.update(&s(0), &a(0), 0.0, &s(0)).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(t.q(&s(0), &a(0)), 0.0);
    }

    #[test]
    fn reward_outside_unit_interval_is_rejected() {
        let mut t = QTable::new(0.5).unwrap();
        assert!(t.update(&s(0), &a(0), 1.5, &s(0)).is_err());
        assert!(t.update(&s(0), &a(0), -0.1, &s(0)).is_err());
        assert!(QTable::new(1.0).is_err());
    }

    #[test]
    fn greedy_ties_go_to_lowest_key() {
        let t = QTable::new(0.9).unwrap();
        let cands = [a(5), a(2), a(7)];
        assert_eq!(t.greedy(&s(0), &cands), Some(&a(2)));
    }

    #[test]
    fn greedy_picks_argmax() {
        let mut t = QTable::new(0.0).unwrap();
        t.update(&s(0), &a(7), 0.9, &s(0)).unwrap();
        t.update(&s(0), &a(2), 0.3, &s(0)).unwrap();
        let cands = [a(2), a(5), a(7)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(t.select_action(&s(0), &cands, &mut rng, SelectionMode::Greedy).unwrap(), &a(7));
        assert!(t.select_action(&s(0), &[], &mut rng, SelectionMode::Greedy).is_err());
    }

    #[test]
    fn forced_exploration_is_uniform() {
        let t = QTable::new(0.9).unwrap();
        let cands: Vec<_> = (0..4).map(a).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let pick = t.select_action(&s(0), &cands, &mut rng, SelectionMode::FixedExploration(1.0)).unwrap();
            counts[pick.0[0] as usize] += 1;
        }
        let p = 0.25;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }
}
