//! Sparse tabular Q-learning: storage, update rule, schedules, action
//! selection, convergence detection and persistence.

mod convergence;
mod persist;
mod schedule;
mod table;

pub use convergence::{has_converged, ConvergenceMonitor};
pub use persist::{fnv1a64, load_table, save_table, FORMAT_VERSION, MAGIC};
pub use schedule::{exploration_prob, learning_rate, ExplorationSchedule};
pub use table::{ActionKey, PairRecord, QTable, SelectionMode, StateKey, StateRecord};
