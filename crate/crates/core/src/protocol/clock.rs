use serde::{Deserialize, Serialize};

use crate::ids::{RingId, TraderId};

/// Logical time: the checkpoint most recently processed and the round
/// inside the interval that follows it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Clock {
    pub checkpoint: u64,
    pub round: u32,
}

impl Clock {
    pub fn at_checkpoint(checkpoint: u64) -> Self {
        Clock { checkpoint, round: 0 }
    }

    pub fn is_boundary(&self) -> bool {
        self.round == 0
    }
}

/// Result of one round of one cooperation ring.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub ring: RingId,
    /// Every member satisfied and the team judged the ring valid.
    pub satisfied: bool,
    /// Members who reported dissatisfaction.
    pub dissenters: Vec<TraderId>,
    /// Majority verdict of the verification team: `true` keeps the ring alive.
    pub team_decision: bool,
}
