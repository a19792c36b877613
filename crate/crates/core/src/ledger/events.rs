//! Append-only command log.
//!
//! One record per ledger command, written as one JSON object per line. The
//! encoding is byte-identical across replays of the same configuration:
//! every collection feeding it is ordered.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::ara::Ara;
use crate::ids::TraderId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Genesis,
    Entrance,
    RequestCoin,
    RegisterRing,
    DissolveRing,
    ProposeFractal,
    SubmitFractal,
    RejectFractal,
    LockCoins,
    Round,
    SettleRing,
    SettleLeftover,
    Sanction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceDelta {
    pub trader: TraderId,
    pub delta: Ara,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub checkpoint: u64,
    pub round: u32,
    pub kind: EventKind,
    pub ids: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub deltas: Vec<BalanceDelta>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn push(
        &mut self,
        checkpoint: u64,
        round: u32,
        kind: EventKind,
        ids: Vec<String>,
        deltas: Vec<BalanceDelta>,
        note: Option<String>,
    ) {
        let seq = self.events.len() as u64;
        self.events.push(Event { seq, checkpoint, round, kind, ids, deltas, note });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_layout() {
        let mut log = EventLog::default();
        log.push(
            2,
            0,
            EventKind::RequestCoin,
            vec!["t1".into(), "c4".into()],
            vec![BalanceDelta { trader: TraderId(1), delta: Ara::from_whole(-1) }],
            None,
        );
        assert_eq!(
            log.to_jsonl(),
            "{\"seq\":0,\"checkpoint\":2,\"round\":0,\"kind\":\"request_coin\",\"ids\":[\"t1\",\"c4\"],\"deltas\":[{\"trader\":1,\"delta\":\"-1.000000\"}]}\n"
        );
        let back: Event = serde_json::from_str(log.to_jsonl().trim()).unwrap();
        assert_eq!(&back, &log.events()[0]);
    }
}
