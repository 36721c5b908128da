use std::collections::VecDeque;

/// `true` iff the last `window` entries of `history` all satisfy `|dQ| < threshold`.
/// Histories shorter than the window are not yet converged.
pub fn has_converged(history: &[f64], window: usize, threshold: f64) -> bool {
    if window == 0 || history.len() < window {
        return false;
    }
    history[history.len() - window..].iter().all(|d| d.abs() < threshold)
}

/// Streaming form of [`has_converged`] over a sliding window of update magnitudes.
#[derive(Clone, Debug)]
pub struct ConvergenceMonitor {
    window: usize,
    threshold: f64,
    recent: VecDeque<f64>,
    above: usize,
    total: u64,
}

impl ConvergenceMonitor {
    pub fn new(window: usize, threshold: f64) -> Self {
        Self { window: window.max(1), threshold, recent: VecDeque::with_capacity(window.max(1)), above: 0, total: 0 }
    }

    pub fn push(&mut self, delta: f64) {
        if self.recent.len() == self.window {
            if let Some(old) = self.recent.pop_front() {
                if old.abs() >= self.threshold {
                    self.above -= 1;
                }
            }
        }
        if delta.abs() >= self.threshold {
            self.above += 1;
        }
        self.recent.push_back(delta);
        self.total += 1;
    }

    pub fn converged(&self) -> bool {
        self.recent.len() == self.window && self.above == 0
    }

    /// Largest magnitude in the current window.
    pub fn window_max(&self) -> f64 {
        self.recent.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn updates_seen(&self) -> u64 {
        self.total
    }

    pub fn window(&self) -> usize {
        self.window
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_updates_converge() {
        assert!(has_converged(&[0.001; 10], 10, 0.01));
    }

    #[test]
    fn one_large_update_blocks() {
        let mut h = vec![0.001; 10];
        h[4] = 0.05;
        assert!(!has_converged(&h, 10, 0.01));
    }

    #[test]
    fn threshold_is_strict() {
        assert!(!has_converged(&[0.01; 10], 10, 0.01));
    }

    #[test]
    fn short_history_is_not_converged() {
        assert!(!has_converged(&[0.0; 3], 10, 0.01));
    }

    #[test]
    fn monitor_matches_batch_rule() {
        let mut m = ConvergenceMonitor::new(5, 0.01);
        let seq = [0.5, 0.001, 0.002, 0.0, 0.003, 0.004, 0.02, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (i, d) in seq.iter().enumerate() {
            m.push(*d);
            assert_eq!(m.converged(), has_converged(&seq[..=i], 5, 0.01), "step {i}");
        }
    }
}
