//! The Traders-Control-Block: accounts, the coin and cooperation tables,
//! fractal records with their Ring-Control-Blocks, the lock graph, and the
//! submission gate that keeps every cooperation ring in at most one
//! submitted fractal.
//!
//! All mutation goes through `&mut Tcb` methods, which gives the single
//! total order of commands the protocol needs; readers take `&Tcb`
//! between commands.
//!
//! ARA is conserved exactly:
//!
//! ```text
//! Σ balances + Σ amounts of Run/Blocked coins = genesis + minted − burned
//! ```
//!
//! Entrance is a transfer, a coin request moves value from a balance into a
//! coin, and settlement returns part of a ring's weight to balances and burns
//! the rest.

mod events;
mod lock;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use events::{BalanceDelta, Event, EventKind, EventLog};
pub use lock::{ring_edges, LockDelta, LockEdge, LockGraph};

use crate::ara::Ara;
use crate::config::SimConfig;
use crate::ids::{CoinId, FractalId, IdAllocator, RingId, ServiceId, TraderId};
use crate::model::{
    transition_coin, validate_coin, validate_ring, Authority, Coin, CoinStatus, CoinType, CoinViolation,
    CooperationRing, Custody, FractalRing, FractalStatus, RingViolation, Trader, TransitionError,
    VerificationTeam,
};
use crate::protocol::{penalty_value, Clock, PenaltySchedule, RoundOutcome};

/// Static parameters the ledger enforces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerParams {
    pub prices: BTreeMap<ServiceId, Ara>,
    pub rounds_per_checkpoint: u32,
    pub fractal_min: usize,
    pub fractal_max: usize,
}

impl LedgerParams {
    pub fn from_config(cfg: &SimConfig) -> Self {
        LedgerParams {
            prices: cfg.service_catalog.iter().map(|s| (s.id, s.unit_price)).collect(),
            rounds_per_checkpoint: cfg.rounds,
            fractal_min: cfg.fractal_min,
            fractal_max: cfg.fractal_max,
        }
    }

    pub fn cheapest(&self) -> Ara {
        self.prices.values().copied().min().unwrap_or(Ara::ZERO)
    }

    /// Number of checkpoint intervals a ring of `rounds_total` rounds spans.
    pub fn span(&self, rounds_total: u32) -> u64 {
        rounds_total.div_ceil(self.rounds_per_checkpoint.max(1)).max(1) as u64
    }
}

/// Record of the balance reduction behind a coin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funding {
    pub trader: TraderId,
    pub amount: Ara,
    pub checkpoint: u64,
    pub balance_before: Ara,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub member: TraderId,
    pub approve: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub checkpoint: u64,
    pub round: u32,
    pub satisfied: bool,
    pub dissenters: usize,
    pub team_decision: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingRecord {
    pub start_checkpoint: u64,
    /// Checkpoint at which the ring is due to settle.
    pub due_checkpoint: u64,
    pub rounds: Vec<RoundRecord>,
    pub payouts: Vec<(TraderId, Ara)>,
    pub settled: bool,
}

/// Ring-Control-Block of one submitted fractal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rcb {
    pub fractal: FractalId,
    pub submitted_at: u64,
    pub rings: BTreeMap<RingId, RingRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    UnknownFractal { fractal: FractalId },
    DoubleSubmission { ring: RingId },
    CoinAlreadyLocked { coin: CoinId },
    CoinReused { coin: CoinId },
    UnknownRing { ring: RingId },
    UnknownCoin { coin: CoinId },
    NotBroadcastInTime { coin: CoinId },
    Unfunded { coin: CoinId },
    InvalidCoin { coin: CoinId, violation: String },
    InvalidRing { ring: RingId, violation: String },
    SizeOutOfBounds { size: usize },
    CreatorBarred { creator: TraderId },
    MajorityAgainst { approvals: usize, needed: usize },
}

impl RejectReason {
    pub fn is_double_submission(&self) -> bool {
        matches!(
            self,
            RejectReason::DoubleSubmission { .. } | RejectReason::CoinAlreadyLocked { .. } | RejectReason::CoinReused { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionOutcome {
    pub fractal: FractalId,
    pub status: FractalStatus,
    pub reason: Option<RejectReason>,
    pub approvals: usize,
}

/// Settlement constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettlementPolicy {
    pub fee_ppm: i64,
    pub bonus_ppm: i64,
    pub phi: PenaltySchedule,
    pub rounds_per_checkpoint: u32,
}

impl SettlementPolicy {
    pub fn from_config(cfg: &SimConfig) -> Self {
        SettlementPolicy {
            fee_ppm: cfg.fee_ppm(),
            bonus_ppm: cfg.bonus_ppm(),
            phi: cfg.phi,
            rounds_per_checkpoint: cfg.rounds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberPayout {
    pub trader: TraderId,
    pub coin: CoinId,
    pub is_investment: bool,
    pub entitlement: Ara,
    pub payout: Ara,
    pub bonus: Ara,
    /// Nominal fraction of the coin forfeited, Σφ over dissatisfied rounds
    /// capped at one.
    pub penalty_fraction: f64,
    pub penalty: Ara,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingSettlement {
    pub ring: RingId,
    pub member_count: usize,
    pub rounds_completed: u32,
    pub rounds_total: u32,
    pub dissatisfied_rounds: u32,
    pub terminated: bool,
    pub members: Vec<MemberPayout>,
    pub burned: Ara,
    pub leftover: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PayoutReport {
    pub settled: Vec<RingSettlement>,
    pub postponed: Vec<RingId>,
}

impl PayoutReport {
    pub fn total_payout(&self) -> Ara {
        self.settled.iter().flat_map(|r| &r.members).map(|m| m.payout + m.bonus).sum()
    }

    pub fn total_penalty(&self) -> Ara {
        self.settled.iter().flat_map(|r| &r.members).map(|m| m.penalty).sum()
    }

    pub fn total_burned(&self) -> Ara {
        self.settled.iter().map(|r| r.burned).sum()
    }
}

/// Consistency report over the whole ledger.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Left side minus right side of the conservation identity, in micro-ARA.
    pub conservation_residual: i64,
    pub double_submitted_rings: usize,
    pub double_locked_coins: usize,
    pub illegal_transitions: usize,
    pub overdue_blocked_coins: usize,
    pub invalid_coins: usize,
    pub custody_mismatches: usize,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        *self == AuditReport::default()
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("unknown trader {0}")]
    UnknownTrader(TraderId),
    #[error("unknown coin {0}")]
    UnknownCoin(CoinId),
    #[error("unknown ring {0}")]
    UnknownRing(RingId),
    #[error("unknown fractal {0}")]
    UnknownFractal(FractalId),
    #[error("unknown coin type for service {0}")]
    UnknownService(ServiceId),
    #[error("insufficient balance: need {needed}, have {available}")]
    InsufficientBalance { needed: Ara, available: Ara },
    #[error("amount {amount} is not a positive multiple of the unit price {unit}")]
    NotMultiple { amount: Ara, unit: Ara },
    #[error("amount {amount} is below the cheapest service price {cheapest}")]
    BelowCheapest { amount: Ara, cheapest: Ara },
    #[error("coin {0} is not running")]
    CoinNotRunning(CoinId),
    #[error("ring {0} was already submitted")]
    RingAlreadySubmitted(RingId),
    #[error("fractal {0} is not in the proposed state")]
    NotProposed(FractalId),
    #[error("fractal {0} is not submitted")]
    NotSubmitted(FractalId),
    #[error("ballot does not match the verification team: {0}")]
    BadBallot(String),
    #[error("settlement is only allowed at a checkpoint boundary")]
    MidRound,
    #[error("ring {0} has already finished")]
    RingFinished(RingId),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Ring(#[from] RingViolation),
    #[error(transparent)]
    Coin(#[from] CoinViolation),
}

#[derive(Clone, Debug)]
pub struct Tcb {
    params: LedgerParams,
    clock: Clock,
    ids: IdAllocator,
    traders: BTreeMap<TraderId, Trader>,
    coins: BTreeMap<CoinId, Coin>,
    rings: BTreeMap<RingId, CooperationRing>,
    fractals: BTreeMap<FractalId, FractalRing>,
    dead_fractals: BTreeSet<FractalId>,
    submitted_rings: BTreeSet<RingId>,
    ring_fractal: BTreeMap<RingId, FractalId>,
    ring_submissions: BTreeMap<RingId, u32>,
    rcbs: BTreeMap<FractalId, Rcb>,
    funding: BTreeMap<CoinId, Funding>,
    custody: BTreeMap<CoinId, Custody>,
    lock_graph: LockGraph,
    status_log: BTreeMap<CoinId, Vec<CoinStatus>>,
    total_ara_genesis: Ara,
    minted: Ara,
    burned: Ara,
    events: EventLog,
}

fn ids<I: IntoIterator<Item = S>, S: ToString>(items: I) -> Vec<String> {
    items.into_iter().map(|s| s.to_string()).collect()
}

impl Tcb {
    pub fn new(params: LedgerParams) -> Self {
        Tcb {
            params,
            clock: Clock::default(),
            ids: IdAllocator::default(),
            traders: BTreeMap::new(),
            coins: BTreeMap::new(),
            rings: BTreeMap::new(),
            fractals: BTreeMap::new(),
            dead_fractals: BTreeSet::new(),
            submitted_rings: BTreeSet::new(),
            ring_fractal: BTreeMap::new(),
            ring_submissions: BTreeMap::new(),
            rcbs: BTreeMap::new(),
            funding: BTreeMap::new(),
            custody: BTreeMap::new(),
            lock_graph: LockGraph::default(),
            status_log: BTreeMap::new(),
            total_ara_genesis: Ara::ZERO,
            minted: Ara::ZERO,
            burned: Ara::ZERO,
            events: EventLog::default(),
        }
    }

    // ----- accessors -------------------------------------------------------

    pub fn params(&self) -> &LedgerParams {
        &self.params
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = clock;
    }

    pub fn trader(&self, id: TraderId) -> Option<&Trader> {
        self.traders.get(&id)
    }

    pub fn traders(&self) -> impl Iterator<Item = &Trader> {
        self.traders.values()
    }

    pub fn trader_ids(&self) -> Vec<TraderId> {
        self.traders.keys().copied().collect()
    }

    pub fn trader_count(&self) -> usize {
        self.traders.len()
    }

    pub fn coin(&self, id: CoinId) -> Option<&Coin> {
        self.coins.get(&id)
    }

    pub fn coins(&self) -> impl Iterator<Item = &Coin> {
        self.coins.values()
    }

    pub fn ring(&self, id: RingId) -> Option<&CooperationRing> {
        self.rings.get(&id)
    }

    pub fn rings(&self) -> impl Iterator<Item = &CooperationRing> {
        self.rings.values()
    }

    pub fn fractal(&self, id: FractalId) -> Option<&FractalRing> {
        self.fractals.get(&id)
    }

    pub fn fractals(&self) -> impl Iterator<Item = &FractalRing> {
        self.fractals.values()
    }

    pub fn is_dead(&self, id: FractalId) -> bool {
        self.dead_fractals.contains(&id)
    }

    pub fn is_submitted(&self, ring: RingId) -> bool {
        self.submitted_rings.contains(&ring)
    }

    pub fn submitted_rings(&self) -> &BTreeSet<RingId> {
        &self.submitted_rings
    }

    pub fn fractal_of(&self, ring: RingId) -> Option<FractalId> {
        self.ring_fractal.get(&ring).copied()
    }

    pub fn rcb(&self, fractal: FractalId) -> Option<&Rcb> {
        self.rcbs.get(&fractal)
    }

    pub fn ring_record(&self, ring: RingId) -> Option<&RingRecord> {
        let f = self.ring_fractal.get(&ring)?;
        self.rcbs.get(f)?.rings.get(&ring)
    }

    pub fn funding(&self, coin: CoinId) -> Option<&Funding> {
        self.funding.get(&coin)
    }

    pub fn custody_of(&self, coin: CoinId) -> Option<&Custody> {
        self.custody.get(&coin)
    }

    pub fn lock_graph(&self) -> &LockGraph {
        &self.lock_graph
    }

    pub fn status_history(&self, coin: CoinId) -> &[CoinStatus] {
        self.status_log.get(&coin).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn total_ara_genesis(&self) -> Ara {
        self.total_ara_genesis
    }

    pub fn minted(&self) -> Ara {
        self.minted
    }

    pub fn burned(&self) -> Ara {
        self.burned
    }

    /// Balances plus the value held in running and blocked coins.
    pub fn circulating(&self) -> Ara {
        let balances: Ara = self.traders.values().map(|t| t.balance).sum();
        let held: Ara = self.coins.values().filter(|c| !c.status.is_terminal()).map(|c| c.amount).sum();
        balances + held
    }

    pub fn conservation_residual(&self) -> i64 {
        (self.circulating() - (self.total_ara_genesis + self.minted - self.burned)).micros()
    }

    fn log(&mut self, kind: EventKind, ids: Vec<String>, deltas: Vec<BalanceDelta>, note: Option<String>) {
        self.events.push(self.clock.checkpoint, self.clock.round, kind, ids, deltas, note);
    }

    fn trader_mut(&mut self, id: TraderId) -> Result<&mut Trader, LedgerError> {
        self.traders.get_mut(&id).ok_or(LedgerError::UnknownTrader(id))
    }

    fn set_status(&mut self, coin: Coin) {
        self.status_log.entry(coin.id).or_default().push(coin.status);
        self.coins.insert(coin.id, coin);
    }

    // ----- accounts --------------------------------------------------------

    /// Creates a founding account; its balance is part of the genesis supply.
    pub fn add_genesis_trader(&mut self, balance: Ara, reliable: bool) -> TraderId {
        let id = self.ids.trader();
        self.traders.insert(id, Trader::new(id, balance, reliable, self.clock.checkpoint));
        self.total_ara_genesis += balance;
        self.log(
            EventKind::Genesis,
            ids([id]),
            vec![BalanceDelta { trader: id, delta: balance }],
            (!reliable).then(|| "wrongdoer".to_string()),
        );
        id
    }

    /// A newcomer buys `amount` from `seller`; no ARA is created.
    pub fn entrance(&mut self, amount: Ara, seller: TraderId, reliable: bool) -> Result<TraderId, LedgerError> {
        let cheapest = self.params.cheapest();
        if amount < cheapest {
            return Err(LedgerError::BelowCheapest { amount, cheapest });
        }
        let available = self.traders.get(&seller).ok_or(LedgerError::UnknownTrader(seller))?.balance;
        if available < amount {
            return Err(LedgerError::InsufficientBalance { needed: amount, available });
        }
        self.trader_mut(seller)?.balance -= amount;
        let id = self.ids.trader();
        self.traders.insert(id, Trader::new(id, amount, reliable, self.clock.checkpoint));
        self.log(
            EventKind::Entrance,
            ids([id, seller]),
            vec![
                BalanceDelta { trader: seller, delta: Ara::ZERO - amount },
                BalanceDelta { trader: id, delta: amount },
            ],
            None,
        );
        Ok(id)
    }

    /// Moves `amount` from the trader's balance into a fresh running coin.
    pub fn request_coin(&mut self, trader: TraderId, coin_type: CoinType, amount: Ara) -> Result<CoinId, LedgerError> {
        let unit = *self
            .params
            .prices
            .get(&coin_type.service)
            .ok_or(LedgerError::UnknownService(coin_type.service))?;
        if !amount.is_positive() || amount.micros() % unit.micros() != 0 {
            return Err(LedgerError::NotMultiple { amount, unit });
        }
        let checkpoint = self.clock.checkpoint;
        let t = self.traders.get_mut(&trader).ok_or(LedgerError::UnknownTrader(trader))?;
        if t.balance < amount {
            return Err(LedgerError::InsufficientBalance { needed: amount, available: t.balance });
        }
        let balance_before = t.balance;
        t.balance -= amount;
        let id = self.ids.coin();
        t.coins_owned.insert(id);
        let coin = Coin::fresh(id, trader, coin_type, amount, checkpoint);
        self.funding.insert(id, Funding { trader, amount, checkpoint, balance_before });
        self.set_status(coin);
        self.log(
            EventKind::RequestCoin,
            ids([trader.to_string(), id.to_string(), coin_type.service.to_string()]),
            vec![BalanceDelta { trader, delta: Ara::ZERO - amount }],
            coin_type.is_investment.then(|| "investment".to_string()),
        );
        Ok(id)
    }

    // ----- cooperation and fractal tables ----------------------------------

    pub fn next_ring_id(&mut self) -> RingId {
        self.ids.ring()
    }

    pub fn next_fractal_id(&mut self) -> FractalId {
        self.ids.fractal()
    }

    /// Adds an assembled ring to the pool of unsubmitted rings.
    pub fn register_ring(&mut self, ring: CooperationRing) -> Result<RingId, LedgerError> {
        for &c in &ring.coin_ids {
            let coin = self.coins.get(&c).ok_or(LedgerError::UnknownCoin(c))?;
            if coin.status != CoinStatus::Run {
                return Err(LedgerError::CoinNotRunning(c));
            }
        }
        let id = ring.id;
        self.log(EventKind::RegisterRing, ids(ring.coin_ids.iter()), vec![], Some(id.to_string()));
        self.rings.insert(id, ring);
        Ok(id)
    }

    /// Removes an unsubmitted ring from the pool, leaving its coins running.
    pub fn dissolve_ring(&mut self, ring: RingId) -> Result<(), LedgerError> {
        if self.submitted_rings.contains(&ring) {
            return Err(LedgerError::RingAlreadySubmitted(ring));
        }
        self.rings.remove(&ring).ok_or(LedgerError::UnknownRing(ring))?;
        self.log(EventKind::DissolveRing, ids([ring]), vec![], None);
        Ok(())
    }

    /// Mutable access for scenario scripts that tamper with the cooperation
    /// table; the submission gate must catch whatever they do.
    pub fn ring_mut_unchecked(&mut self, ring: RingId) -> Option<&mut CooperationRing> {
        if self.submitted_rings.contains(&ring) {
            return None;
        }
        self.rings.get_mut(&ring)
    }

    fn write_fractal_links(&mut self, ring_ids: &[RingId]) {
        let n = ring_ids.len();
        for (i, r) in ring_ids.iter().enumerate() {
            if self.submitted_rings.contains(r) {
                continue;
            }
            if let Some(ring) = self.rings.get_mut(r) {
                ring.prev_in_fractal = (i > 0).then(|| ring_ids[i - 1]);
                ring.next_in_fractal = (i + 1 < n).then(|| ring_ids[i + 1]);
            }
        }
    }

    /// Records a proposed fractal ring. A ring may sit in several proposals
    /// at once; the submission gate admits at most one of them.
    pub fn propose_fractal(
        &mut self,
        id: FractalId,
        ring_ids: Vec<RingId>,
        creator: TraderId,
        team: VerificationTeam,
    ) -> Result<FractalId, LedgerError> {
        if !self.traders.contains_key(&creator) {
            return Err(LedgerError::UnknownTrader(creator));
        }
        for &r in &ring_ids {
            if !self.rings.contains_key(&r) {
                return Err(LedgerError::UnknownRing(r));
            }
        }
        self.write_fractal_links(&ring_ids);
        let mut event_ids = vec![id.to_string(), creator.to_string()];
        event_ids.extend(ring_ids.iter().map(|r| r.to_string()));
        self.fractals.insert(
            id,
            FractalRing { id, ring_ids, creator, team, status: FractalStatus::Proposed },
        );
        self.log(EventKind::ProposeFractal, event_ids, vec![], None);
        Ok(id)
    }

    /// Runs every submission check except the vote, without changing the
    /// ledger. This is what an honest team member verifies before voting.
    pub fn precheck_fractal(&self, fractal: FractalId) -> Result<(), RejectReason> {
        match self.fractals.get(&fractal) {
            Some(f) => self.check_submission(f),
            None => Err(RejectReason::UnknownFractal { fractal }),
        }
    }

    /// The ring a rejection points at, if it points at one.
    pub fn offending_ring(&self, fractal_rings: &[RingId], reason: &RejectReason) -> Option<RingId> {
        let coin = match reason {
            RejectReason::InvalidRing { ring, .. } | RejectReason::UnknownRing { ring } => return Some(*ring),
            RejectReason::UnknownCoin { coin }
            | RejectReason::NotBroadcastInTime { coin }
            | RejectReason::Unfunded { coin }
            | RejectReason::InvalidCoin { coin, .. } => *coin,
            _ => return None,
        };
        fractal_rings
            .iter()
            .copied()
            .find(|r| self.rings.get(r).is_some_and(|ring| ring.coin_ids.contains(&coin)))
    }

    fn check_submission(&self, fractal: &FractalRing) -> Result<(), RejectReason> {
        let size = fractal.ring_ids.len();
        if size < self.params.fractal_min || size > self.params.fractal_max {
            return Err(RejectReason::SizeOutOfBounds { size });
        }
        let now = self.clock.checkpoint;
        let mut coins_seen = HashSet::new();
        let mut rings_seen = HashSet::new();
        for &r in &fractal.ring_ids {
            if self.submitted_rings.contains(&r) || !rings_seen.insert(r) {
                return Err(RejectReason::DoubleSubmission { ring: r });
            }
            let ring = self.rings.get(&r).ok_or(RejectReason::UnknownRing { ring: r })?;
            for &c in &ring.coin_ids {
                let coin = self.coins.get(&c).ok_or(RejectReason::UnknownCoin { coin: c })?;
                if !coins_seen.insert(c) {
                    return Err(RejectReason::CoinReused { coin: c });
                }
                if coin.status != CoinStatus::Run {
                    return Err(RejectReason::CoinAlreadyLocked { coin: c });
                }
                if coin.broadcast_at >= now {
                    return Err(RejectReason::NotBroadcastInTime { coin: c });
                }
                match self.funding.get(&c) {
                    Some(f)
                        if f.trader == coin.owner
                            && f.amount == coin.amount
                            && f.balance_before >= coin.amount
                            && f.checkpoint == coin.broadcast_at => {}
                    _ => return Err(RejectReason::Unfunded { coin: c }),
                }
                if let Err(v) = validate_coin(coin) {
                    return Err(RejectReason::InvalidCoin { coin: c, violation: v.to_string() });
                }
            }
            if let Err(v) = validate_ring(ring, |id| self.coins.get(&id)) {
                return Err(RejectReason::InvalidRing { ring: r, violation: v.to_string() });
            }
        }
        if let Some(t) = self.traders.get(&fractal.creator) {
            if t.is_barred(now) {
                return Err(RejectReason::CreatorBarred { creator: fractal.creator });
            }
        }
        Ok(())
    }

    /// The submission gate. Admits the fractal only if the team majority
    /// approves and every ring passes the funding, broadcast and table
    /// checks without overlapping an earlier submission; otherwise the
    /// proposal is discarded and its rings go back to the pool.
    pub fn submit_fractal(&mut self, fractal_id: FractalId, votes: &[Vote]) -> Result<SubmissionOutcome, LedgerError> {
        let fractal = match self.fractals.get(&fractal_id) {
            Some(f) if f.status == FractalStatus::Proposed => f.clone(),
            Some(_) => return Err(LedgerError::NotProposed(fractal_id)),
            None => return Err(LedgerError::UnknownFractal(fractal_id)),
        };
        if votes.len() != fractal.team.size() {
            return Err(LedgerError::BadBallot(format!(
                "{} votes for a team of {}",
                votes.len(),
                fractal.team.size()
            )));
        }
        let mut voters = HashSet::with_capacity(votes.len());
        for v in votes {
            if !fractal.team.contains(v.member) {
                return Err(LedgerError::BadBallot(format!("{} is not on the team", v.member)));
            }
            if !voters.insert(v.member) {
                return Err(LedgerError::BadBallot(format!("{} voted twice", v.member)));
            }
        }
        let approvals = votes.iter().filter(|v| v.approve).count();
        let needed = fractal.team.majority();

        let verdict = self.check_submission(&fractal).and_then(|()| {
            if approvals >= needed {
                Ok(())
            } else {
                Err(RejectReason::MajorityAgainst { approvals, needed })
            }
        });

        match verdict {
            Ok(()) => {
                self.write_fractal_links(&fractal.ring_ids);
                let now = self.clock.checkpoint;
                let mut records = BTreeMap::new();
                for &r in &fractal.ring_ids {
                    self.submitted_rings.insert(r);
                    *self.ring_submissions.entry(r).or_default() += 1;
                    self.ring_fractal.insert(r, fractal_id);
                    let span = self.params.span(self.rings[&r].rounds_total);
                    records.insert(
                        r,
                        RingRecord {
                            start_checkpoint: now,
                            due_checkpoint: now + span,
                            rounds: Vec::new(),
                            payouts: Vec::new(),
                            settled: false,
                        },
                    );
                }
                self.rcbs.insert(fractal_id, Rcb { fractal: fractal_id, submitted_at: now, rings: records });
                self.fractals.get_mut(&fractal_id).unwrap().status = FractalStatus::Submitted;
                let mut event_ids = vec![fractal_id.to_string()];
                event_ids.extend(fractal.ring_ids.iter().map(|r| r.to_string()));
                self.log(EventKind::SubmitFractal, event_ids, vec![], Some(format!("approvals={approvals}")));
                for &r in &fractal.ring_ids {
                    self.lock_coins(r, fractal_id)?;
                }
                Ok(SubmissionOutcome { fractal: fractal_id, status: FractalStatus::Submitted, reason: None, approvals })
            }
            Err(reason) => {
                self.fractals.remove(&fractal_id);
                self.dead_fractals.insert(fractal_id);
                for &r in &fractal.ring_ids {
                    if !self.submitted_rings.contains(&r) {
                        if let Some(ring) = self.rings.get_mut(&r) {
                            ring.next_in_fractal = None;
                            ring.prev_in_fractal = None;
                        }
                    }
                }
                let note = serde_json::to_string(&reason).expect("reason serializes");
                self.log(EventKind::RejectFractal, ids([fractal_id]), vec![], Some(note));
                Ok(SubmissionOutcome {
                    fractal: fractal_id,
                    status: FractalStatus::Rejected,
                    reason: Some(reason),
                    approvals,
                })
            }
        }
    }

    /// Blocks every coin of a ring inside a submitted fractal and writes the
    /// lock graph: workers' coins are held for the investor, the investment
    /// coin is held across the workers (recorded against the first one).
    pub fn lock_coins(&mut self, ring_id: RingId, fractal_id: FractalId) -> Result<LockDelta, LedgerError> {
        let ring = self.rings.get(&ring_id).ok_or(LedgerError::UnknownRing(ring_id))?.clone();
        let fractal = self.fractals.get(&fractal_id).ok_or(LedgerError::UnknownFractal(fractal_id))?;
        if fractal.status != FractalStatus::Submitted || self.ring_fractal.get(&ring_id) != Some(&fractal_id) {
            return Err(LedgerError::NotSubmitted(fractal_id));
        }
        let team = fractal.team.clone();
        let due = self
            .ring_record(ring_id)
            .map(|r| r.due_checkpoint)
            .unwrap_or(self.clock.checkpoint + self.params.span(ring.rounds_total));
        let n = ring.coin_ids.len();
        let coins: Vec<Coin> = ring
            .coin_ids
            .iter()
            .map(|c| self.coins.get(c).cloned().ok_or(LedgerError::UnknownCoin(*c)))
            .collect::<Result<_, _>>()?;
        if let Some(c) = coins.iter().find(|c| c.status != CoinStatus::Run) {
            return Err(LedgerError::CoinNotRunning(c.id));
        }
        let authority = Authority { team: &team, checkpoint: self.clock.checkpoint };
        let mut updated = Vec::with_capacity(n);
        let mut delta = LockDelta { ring: ring_id, edges: Vec::new(), custody: Vec::new() };
        for (i, coin) in coins.iter().enumerate() {
            let next = &coins[(i + 1) % n];
            let prev = &coins[(i + n - 1) % n];
            let holder = if coin.coin_type.is_investment {
                coins.iter().find(|c| !c.coin_type.is_investment).map(|c| c.owner).unwrap_or(next.owner)
            } else {
                ring.investor
            };
            let custody = Custody { fractal: fractal_id, holder, next: next.id, prev: prev.id, due_checkpoint: due };
            updated.push((transition_coin(coin, CoinStatus::Blocked, authority, &custody)?, custody));
            delta.custody.push((coin.id, holder));
        }
        let workers: Vec<TraderId> = coins.iter().filter(|c| !c.coin_type.is_investment).map(|c| c.owner).collect();
        delta.edges = ring_edges(ring.investor, &workers);
        for (coin, custody) in updated {
            self.custody.insert(coin.id, custody);
            self.set_status(coin);
        }
        self.lock_graph.apply(&delta);
        self.log(EventKind::LockCoins, ids(ring.coin_ids.iter()), vec![], Some(ring_id.to_string()));
        Ok(delta)
    }

    // ----- rounds ----------------------------------------------------------

    /// Applies one round outcome to its ring and Ring-Control-Block.
    pub fn record_round(&mut self, outcome: &RoundOutcome) -> Result<(), LedgerError> {
        let ring_id = outcome.ring;
        let fractal = *self.ring_fractal.get(&ring_id).ok_or(LedgerError::UnknownRing(ring_id))?;
        let ring = self.rings.get_mut(&ring_id).ok_or(LedgerError::UnknownRing(ring_id))?;
        if ring.is_finished() {
            return Err(LedgerError::RingFinished(ring_id));
        }
        if !outcome.satisfied {
            ring.dissatisfied_rounds += 1;
        }
        if outcome.team_decision {
            ring.rounds_completed += 1;
        } else {
            ring.terminated = true;
        }
        let finished = ring.is_finished();
        let coin_ids = ring.coin_ids.clone();
        let clock = self.clock;
        let record = self
            .rcbs
            .get_mut(&fractal)
            .and_then(|rcb| rcb.rings.get_mut(&ring_id))
            .ok_or(LedgerError::UnknownRing(ring_id))?;
        record.rounds.push(RoundRecord {
            checkpoint: clock.checkpoint,
            round: clock.round,
            satisfied: outcome.satisfied,
            dissenters: outcome.dissenters.len(),
            team_decision: outcome.team_decision,
        });
        if finished {
            // Due at the next checkpoint, whatever was scheduled.
            record.due_checkpoint = clock.checkpoint + 1;
            for c in coin_ids {
                if let Some(custody) = self.custody.get_mut(&c) {
                    custody.due_checkpoint = clock.checkpoint + 1;
                }
            }
        }
        let mut event_ids = ids([ring_id]);
        event_ids.extend(outcome.dissenters.iter().map(|t| t.to_string()));
        let note = match (outcome.satisfied, outcome.team_decision) {
            (true, _) => "satisfied",
            (false, true) => "dissatisfied",
            (false, false) => "terminated",
        };
        self.log(EventKind::Round, event_ids, vec![], Some(note.to_string()));
        Ok(())
    }

    /// Bars `trader` from submitting fractal rings through `last_checkpoint`.
    pub fn bar_trader(&mut self, trader: TraderId, last_checkpoint: u64) -> Result<(), LedgerError> {
        let t = self.trader_mut(trader)?;
        t.barred_through = Some(t.barred_through.map_or(last_checkpoint, |b| b.max(last_checkpoint)));
        self.log(EventKind::Sanction, ids([trader]), vec![], Some(format!("through={last_checkpoint}")));
        Ok(())
    }

    // ----- settlement ------------------------------------------------------

    fn settle_ring(
        &mut self,
        ring_id: RingId,
        authority: Authority<'_>,
        policy: &SettlementPolicy,
        leftover: bool,
    ) -> Result<RingSettlement, LedgerError> {
        let ring = self.rings.get(&ring_id).ok_or(LedgerError::UnknownRing(ring_id))?.clone();
        let coins: Vec<Coin> = ring
            .coin_ids
            .iter()
            .map(|c| self.coins.get(c).cloned().ok_or(LedgerError::UnknownCoin(*c)))
            .collect::<Result<_, _>>()?;
        let phi = penalty_value(&policy.phi, ring.member_count, policy.rounds_per_checkpoint);
        let sum_phi = (ring.dissatisfied_rounds as f64 * phi).min(1.0);
        let worker_total: Ara = coins.iter().filter(|c| !c.coin_type.is_investment).map(|c| c.amount).sum();
        let rounds_total = ring.rounds_total.max(1) as i64;

        let mut members = Vec::with_capacity(coins.len());
        let mut settled_coins = Vec::with_capacity(coins.len());
        let mut deltas = Vec::with_capacity(coins.len());
        let mut paid_out = Ara::ZERO;
        let mut bonus_total = Ara::ZERO;
        for coin in &coins {
            let custody = *self.custody.get(&coin.id).ok_or(LedgerError::CoinNotRunning(coin.id))?;
            let (entitlement, payout, to) = if coin.coin_type.is_investment {
                (Ara::ZERO, Ara::ZERO, CoinStatus::Expired)
            } else {
                let share = ring.weight.mul_ratio(coin.amount.micros(), worker_total.micros());
                let entitlement = share.mul_ratio(policy.fee_ppm, 1_000_000);
                let earned = entitlement.mul_ratio(ring.rounds_completed as i64, rounds_total);
                let deduction = Ara::from_micros((entitlement.micros() as f64 * sum_phi).floor() as i64);
                (entitlement, (earned - deduction).max(Ara::ZERO), CoinStatus::Paid)
            };
            let bonus = coin.amount.mul_ratio(policy.bonus_ppm, 1_000_000);
            let penalty = Ara::from_micros((coin.amount.micros() as f64 * sum_phi).floor() as i64);
            settled_coins.push(transition_coin(coin, to, authority, &custody)?);
            paid_out += payout;
            bonus_total += bonus;
            if payout + bonus != Ara::ZERO {
                deltas.push(BalanceDelta { trader: coin.owner, delta: payout + bonus });
            }
            members.push(MemberPayout {
                trader: coin.owner,
                coin: coin.id,
                is_investment: coin.coin_type.is_investment,
                entitlement,
                payout,
                bonus,
                penalty_fraction: sum_phi,
                penalty,
            });
        }
        for m in &members {
            let t = self.trader_mut(m.trader)?;
            t.balance += m.payout + m.bonus;
            t.penalty_accrued += m.penalty;
        }
        for coin in settled_coins {
            self.set_status(coin);
        }
        let burned = ring.weight - paid_out;
        self.burned += burned;
        self.minted += bonus_total;
        self.lock_graph.release(ring_id, &ring.coin_ids);
        for c in &ring.coin_ids {
            self.custody.remove(c);
        }
        let fractal = self.ring_fractal[&ring_id];
        if let Some(record) = self.rcbs.get_mut(&fractal).and_then(|r| r.rings.get_mut(&ring_id)) {
            record.settled = true;
            record.payouts = members.iter().map(|m| (m.trader, m.payout + m.bonus)).collect();
        }
        self.log(
            if leftover { EventKind::SettleLeftover } else { EventKind::SettleRing },
            ids([ring_id.to_string(), fractal.to_string()]),
            deltas,
            Some(format!(
                "rounds={}/{} dissatisfied={} burned={}",
                ring.rounds_completed, ring.rounds_total, ring.dissatisfied_rounds, burned
            )),
        );
        Ok(RingSettlement {
            ring: ring_id,
            member_count: ring.member_count,
            rounds_completed: ring.rounds_completed,
            rounds_total: ring.rounds_total,
            dissatisfied_rounds: ring.dissatisfied_rounds,
            terminated: ring.terminated,
            members,
            burned,
            leftover,
        })
    }

    fn finish_fractal_if_done(&mut self, fractal: FractalId) {
        let done = self.rcbs.get(&fractal).is_some_and(|rcb| rcb.rings.values().all(|r| r.settled));
        if done {
            if let Some(f) = self.fractals.get_mut(&fractal) {
                f.status = FractalStatus::Settled;
            }
        }
    }

    /// Settles, on behalf of the fractal's own team, every ring of the
    /// fractal that has run all its rounds or was terminated. Rings with
    /// rounds still ahead are postponed to a later checkpoint.
    pub fn settle_checkpoint(&mut self, fractal_id: FractalId, policy: &SettlementPolicy) -> Result<PayoutReport, LedgerError> {
        if !self.clock.is_boundary() {
            return Err(LedgerError::MidRound);
        }
        let fractal = self.fractals.get(&fractal_id).ok_or(LedgerError::UnknownFractal(fractal_id))?;
        if fractal.status != FractalStatus::Submitted {
            return Err(LedgerError::NotSubmitted(fractal_id));
        }
        let team = fractal.team.clone();
        let ring_ids = fractal.ring_ids.clone();
        let authority = Authority { team: &team, checkpoint: self.clock.checkpoint };
        let mut report = PayoutReport::default();
        for r in ring_ids {
            let settled = self.ring_record(r).is_some_and(|rec| rec.settled);
            if settled {
                continue;
            }
            if self.rings[&r].is_finished() {
                report.settled.push(self.settle_ring(r, authority, policy, false)?);
            } else {
                report.postponed.push(r);
            }
        }
        self.finish_fractal_if_done(fractal_id);
        Ok(report)
    }

    /// Finished rings whose settlement checkpoint has already passed.
    pub fn overdue_rings(&self) -> Vec<RingId> {
        let now = self.clock.checkpoint;
        self.rcbs
            .values()
            .flat_map(|rcb| rcb.rings.iter())
            .filter(|(r, rec)| !rec.settled && rec.due_checkpoint < now && self.rings[r].is_finished())
            .map(|(&r, _)| r)
            .collect()
    }

    /// Settles overdue rings on behalf of a later verification team.
    pub fn settle_leftovers(&mut self, team: &VerificationTeam, policy: &SettlementPolicy) -> Result<PayoutReport, LedgerError> {
        if !self.clock.is_boundary() {
            return Err(LedgerError::MidRound);
        }
        let authority = Authority { team, checkpoint: self.clock.checkpoint };
        let mut report = PayoutReport::default();
        let mut touched = BTreeSet::new();
        for r in self.overdue_rings() {
            report.settled.push(self.settle_ring(r, authority, policy, true)?);
            touched.insert(self.ring_fractal[&r]);
        }
        for f in touched {
            self.finish_fractal_if_done(f);
        }
        Ok(report)
    }

    // ----- audit -----------------------------------------------------------

    pub fn audit(&self) -> AuditReport {
        let now = self.clock.checkpoint;
        let mut report = AuditReport {
            conservation_residual: self.conservation_residual(),
            double_submitted_rings: self.ring_submissions.values().filter(|&&n| n > 1).count(),
            ..AuditReport::default()
        };
        for (id, history) in &self.status_log {
            let legal = history.first() == Some(&CoinStatus::Run) && history.windows(2).all(|w| w[0].can_become(w[1]));
            if !legal {
                report.illegal_transitions += 1;
            }
            if history.iter().filter(|&&s| s == CoinStatus::Blocked).count() > 1 {
                report.double_locked_coins += 1;
            }
            let coin = &self.coins[id];
            if validate_coin(coin).is_err() {
                report.invalid_coins += 1;
            }
            if coin.status == CoinStatus::Blocked {
                match self.custody.get(id) {
                    Some(c) if now > c.due_checkpoint => report.overdue_blocked_coins += 1,
                    Some(_) => {}
                    None => report.custody_mismatches += 1,
                }
                if self.lock_graph.holder(*id) != coin.bind_on {
                    report.custody_mismatches += 1;
                }
            }
        }
        report
    }
}
