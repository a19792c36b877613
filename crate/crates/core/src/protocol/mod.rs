//! Time engine: checkpoint processes, rounds, verification votes and
//! sanctions.

mod clock;
mod engine;
mod penalty;

pub use clock::{Clock, RoundOutcome};
pub use engine::{CheckpointMetrics, EngineError, Simulation, Tallies};
pub use penalty::{compute_round_count, penalty_value, PenaltyMode, PenaltySchedule, RoundCountError};
