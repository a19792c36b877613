//! The lock graph: who waits on whom until settlement.
//!
//! Inside a locked ring the investor waits on every worker (for service) and
//! every worker waits on the investor (for payment). The custody map records
//! which trader holds each blocked coin and mirrors the coin's `bind_on`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ids::{CoinId, RingId, TraderId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LockEdge {
    pub waiter: TraderId,
    pub waited_on: TraderId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockDelta {
    pub ring: RingId,
    pub edges: Vec<LockEdge>,
    pub custody: Vec<(CoinId, TraderId)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LockGraph {
    edges: BTreeMap<RingId, Vec<LockEdge>>,
    custody: BTreeMap<CoinId, TraderId>,
}

impl LockGraph {
    pub fn apply(&mut self, delta: &LockDelta) {
        self.edges.insert(delta.ring, delta.edges.clone());
        for &(coin, holder) in &delta.custody {
            self.custody.insert(coin, holder);
        }
    }

    /// Drops the ring's edges and releases custody of its coins.
    pub fn release(&mut self, ring: RingId, coins: &[CoinId]) {
        self.edges.remove(&ring);
        for c in coins {
            self.custody.remove(c);
        }
    }

    pub fn edges(&self, ring: RingId) -> &[LockEdge] {
        self.edges.get(&ring).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn holder(&self, coin: CoinId) -> Option<TraderId> {
        self.custody.get(&coin).copied()
    }

    pub fn custody(&self) -> impl Iterator<Item = (CoinId, TraderId)> + '_ {
        self.custody.iter().map(|(&c, &t)| (c, t))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    pub fn locked_rings(&self) -> usize {
        self.edges.len()
    }
}

/// Edges for a ring whose investor is `investor` and whose workers are
/// `workers`: one edge each way per worker.
pub fn ring_edges(investor: TraderId, workers: &[TraderId]) -> Vec<LockEdge> {
    let mut edges = Vec::with_capacity(2 * workers.len());
    for &w in workers {
        edges.push(LockEdge { waiter: w, waited_on: investor });
        edges.push(LockEdge { waiter: investor, waited_on: w });
    }
    edges
}
