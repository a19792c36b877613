//! Domain records of the protocol: coins, cooperation rings, fractal rings,
//! verification teams and traders, together with their pure validators.
//!
//! The coin status machine is the central invariant carrier:
//!
//! ```text
//! Run ──► Blocked ──► Expired
//!                └──► Paid
//! ```
//!
//! A coin leaves `Run` only when the fractal ring containing its cooperation
//! ring is submitted, and only a verification team can move it.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ara::Ara;
use crate::ids::{CoinId, FractalId, RingId, ServiceId, TraderId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoinStatus {
    Run,
    Blocked,
    Expired,
    Paid,
}

impl CoinStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, CoinStatus::Expired | CoinStatus::Paid)
    }

    pub fn can_become(self, to: CoinStatus) -> bool {
        matches!(
            (self, to),
            (CoinStatus::Run, CoinStatus::Blocked)
                | (CoinStatus::Blocked, CoinStatus::Expired)
                | (CoinStatus::Blocked, CoinStatus::Paid)
        )
    }
}

/// Service tag of a coin. Investment coins pay for a job; worker coins
/// commit their holder to serve it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoinType {
    pub service: ServiceId,
    pub is_investment: bool,
}

impl CoinType {
    pub fn worker(service: ServiceId) -> Self {
        CoinType { service, is_investment: false }
    }

    pub fn investment(service: ServiceId) -> Self {
        CoinType { service, is_investment: true }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coin {
    pub id: CoinId,
    pub amount: Ara,
    pub status: CoinStatus,
    pub coin_type: CoinType,
    pub next_in_ring: Option<CoinId>,
    pub prev_in_ring: Option<CoinId>,
    pub bind_on: Option<TraderId>,
    pub owner: TraderId,
    /// Checkpoint index at which the coin request was broadcast.
    pub broadcast_at: u64,
}

impl Coin {
    pub fn fresh(id: CoinId, owner: TraderId, coin_type: CoinType, amount: Ara, broadcast_at: u64) -> Self {
        Coin {
            id,
            amount,
            status: CoinStatus::Run,
            coin_type,
            next_in_ring: None,
            prev_in_ring: None,
            bind_on: None,
            owner,
            broadcast_at,
        }
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum CoinViolation {
    #[error("bad amount: coin amounts must be positive")]
    BadAmount,
    #[error("dangling link: ring links must both be present or both absent")]
    DanglingLink,
    #[error("bind/status mismatch: bind_on must be set exactly for blocked and paid coins")]
    BindStatusMismatch,
    #[error("ring/status mismatch: a coin belongs to a ring exactly when it is not running")]
    RingStatusMismatch,
}

/// Checks the coin-table invariants, reporting the first one violated.
pub fn validate_coin(coin: &Coin) -> Result<(), CoinViolation> {
    if !coin.amount.is_positive() {
        return Err(CoinViolation::BadAmount);
    }
    let linked = match (coin.next_in_ring, coin.prev_in_ring) {
        (None, None) => false,
        (Some(next), Some(prev)) if next != coin.id && prev != coin.id => true,
        _ => return Err(CoinViolation::DanglingLink),
    };
    let bound = coin.bind_on.is_some();
    let should_bind = matches!(coin.status, CoinStatus::Blocked | CoinStatus::Paid);
    if bound != should_bind {
        return Err(CoinViolation::BindStatusMismatch);
    }
    if linked != (coin.status != CoinStatus::Run) {
        return Err(CoinViolation::RingStatusMismatch);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooperationRing {
    pub id: RingId,
    pub service: ServiceId,
    pub coin_ids: Vec<CoinId>,
    pub member_count: usize,
    pub weight: Ara,
    pub investor: TraderId,
    pub next_in_fractal: Option<RingId>,
    pub prev_in_fractal: Option<RingId>,
    pub rounds_total: u32,
    pub rounds_completed: u32,
    pub dissatisfied_rounds: u32,
    pub terminated: bool,
}

impl CooperationRing {
    pub fn is_finished(&self) -> bool {
        self.terminated || self.rounds_completed >= self.rounds_total
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("unknown coin {0}")]
pub struct UnknownCoin(pub CoinId);

/// Exact sum of the member coin amounts.
pub fn ring_weight<'a, F>(ring: &CooperationRing, lookup: F) -> Result<Ara, UnknownCoin>
where
    F: Fn(CoinId) -> Option<&'a Coin>,
{
    ring.coin_ids
        .iter()
        .map(|&id| lookup(id).map(|c| c.amount).ok_or(UnknownCoin(id)))
        .sum::<Result<Ara, UnknownCoin>>()
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum RingViolation {
    #[error("ring has fewer than two members")]
    TooSmall,
    #[error("member count {stored} disagrees with {actual} coins")]
    MemberCount { stored: usize, actual: usize },
    #[error("ring must contain exactly one investment coin, found {0}")]
    InvestmentCount(usize),
    #[error("investor does not own the investment coin")]
    InvestorMismatch,
    #[error("trader {0} owns more than one coin in the ring")]
    DuplicateOwner(TraderId),
    #[error("coin {0} appears twice")]
    DuplicateCoin(CoinId),
    #[error("coin {0} belongs to another service")]
    ServiceMismatch(CoinId),
    #[error("stored weight {stored} differs from recomputed {actual}")]
    WeightMismatch { stored: Ara, actual: Ara },
    #[error("rounds completed exceed rounds total")]
    RoundOverflow,
    #[error(transparent)]
    UnknownCoin(#[from] UnknownCoin),
}

/// Checks the cooperation-table invariants against the coin table.
pub fn validate_ring<'a, F>(ring: &CooperationRing, lookup: F) -> Result<(), RingViolation>
where
    F: Fn(CoinId) -> Option<&'a Coin>,
{
    let actual = ring.coin_ids.len();
    if actual < 2 {
        return Err(RingViolation::TooSmall);
    }
    if ring.member_count != actual {
        return Err(RingViolation::MemberCount { stored: ring.member_count, actual });
    }
    let mut seen_coins = HashSet::with_capacity(actual);
    let mut owners = HashSet::with_capacity(actual);
    let mut investments = 0;
    for &id in &ring.coin_ids {
        let coin = lookup(id).ok_or(UnknownCoin(id))?;
        if !seen_coins.insert(id) {
            return Err(RingViolation::DuplicateCoin(id));
        }
        if !owners.insert(coin.owner) {
            return Err(RingViolation::DuplicateOwner(coin.owner));
        }
        if coin.coin_type.service != ring.service {
            return Err(RingViolation::ServiceMismatch(id));
        }
        if coin.coin_type.is_investment {
            investments += 1;
            if coin.owner != ring.investor {
                return Err(RingViolation::InvestorMismatch);
            }
        }
    }
    if investments != 1 {
        return Err(RingViolation::InvestmentCount(investments));
    }
    let weight = ring_weight(ring, &lookup)?;
    if weight != ring.weight {
        return Err(RingViolation::WeightMismatch { stored: ring.weight, actual: weight });
    }
    if ring.rounds_completed > ring.rounds_total {
        return Err(RingViolation::RoundOverflow);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractalStatus {
    Proposed,
    Submitted,
    Rejected,
    Settled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationTeam {
    members: Vec<TraderId>,
    fractal: FractalId,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum TeamError {
    #[error("team size {0} must be odd")]
    EvenSize(usize),
    #[error("trader {0} appears twice in the team")]
    DuplicateMember(TraderId),
}

impl VerificationTeam {
    pub fn new(fractal: FractalId, members: Vec<TraderId>) -> Result<Self, TeamError> {
        if members.len().is_multiple_of(2) {
            return Err(TeamError::EvenSize(members.len()));
        }
        let mut seen = HashSet::with_capacity(members.len());
        for &m in &members {
            if !seen.insert(m) {
                return Err(TeamError::DuplicateMember(m));
            }
        }
        Ok(VerificationTeam { members, fractal })
    }

    pub fn members(&self) -> &[TraderId] {
        &self.members
    }

    pub fn fractal(&self) -> FractalId {
        self.fractal
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, trader: TraderId) -> bool {
        self.members.contains(&trader)
    }

    /// Smallest number of votes that forms a strict majority.
    pub fn majority(&self) -> usize {
        self.members.len() / 2 + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FractalRing {
    pub id: FractalId,
    pub ring_ids: Vec<RingId>,
    pub creator: TraderId,
    pub team: VerificationTeam,
    pub status: FractalStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trader {
    pub id: TraderId,
    pub balance: Ara,
    /// `false` marks a wrongdoer.
    pub reliable: bool,
    pub joined_at: u64,
    pub penalty_accrued: Ara,
    pub coins_owned: BTreeSet<CoinId>,
    /// Last checkpoint (inclusive) at which this trader may not submit a
    /// fractal ring.
    pub barred_through: Option<u64>,
}

impl Trader {
    pub fn new(id: TraderId, balance: Ara, reliable: bool, joined_at: u64) -> Self {
        Trader {
            id,
            balance,
            reliable,
            joined_at,
            penalty_accrued: Ara::ZERO,
            coins_owned: BTreeSet::new(),
            barred_through: None,
        }
    }

    pub fn is_barred(&self, checkpoint: u64) -> bool {
        self.barred_through.is_some_and(|last| checkpoint <= last)
    }
}

/// Where a locked coin sits: the fractal whose team owns it, its ring
/// neighbours, the trader holding it, and the checkpoint it is due to
/// settle at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Custody {
    pub fractal: FractalId,
    pub holder: TraderId,
    pub next: CoinId,
    pub prev: CoinId,
    pub due_checkpoint: u64,
}

/// The team asking for a transition and the checkpoint it acts at.
#[derive(Clone, Copy, Debug)]
pub struct Authority<'a> {
    pub team: &'a VerificationTeam,
    pub checkpoint: u64,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum TransitionError {
    #[error("illegal transition {from:?} -> {to:?}")]
    Illegal { from: CoinStatus, to: CoinStatus },
    #[error("team of {team} may not move a coin held for {owner}")]
    Unauthorized { team: FractalId, owner: FractalId },
}

/// Applies one status-machine edge on behalf of a verification team.
///
/// The owning fractal's team may make any legal move. Any other team may
/// only close out a coin still `Blocked` after its due checkpoint has
/// passed.
pub fn transition_coin(
    coin: &Coin,
    to: CoinStatus,
    authority: Authority<'_>,
    custody: &Custody,
) -> Result<Coin, TransitionError> {
    if !coin.status.can_become(to) {
        return Err(TransitionError::Illegal { from: coin.status, to });
    }
    let owning = authority.team.fractal() == custody.fractal;
    let overdue = coin.status == CoinStatus::Blocked
        && to.is_terminal()
        && authority.checkpoint > custody.due_checkpoint;
    if !owning && !overdue {
        return Err(TransitionError::Unauthorized {
            team: authority.team.fractal(),
            owner: custody.fractal,
        });
    }
    let mut next = coin.clone();
    next.status = to;
    match to {
        CoinStatus::Blocked => {
            next.next_in_ring = Some(custody.next);
            next.prev_in_ring = Some(custody.prev);
            next.bind_on = Some(custody.holder);
        }
        CoinStatus::Expired => next.bind_on = None,
        CoinStatus::Paid | CoinStatus::Run => {}
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn coin(id: u64, owner: u64, amount: &str, investment: bool) -> Coin {
        let ty = if investment {
            CoinType::investment(ServiceId(0))
        } else {
            CoinType::worker(ServiceId(0))
        };
        Coin::fresh(CoinId(id), TraderId(owner), ty, amount.parse().unwrap(), 0)
    }

    fn ring_of(coins: &[&Coin], weight: Ara) -> CooperationRing {
        CooperationRing {
            id: RingId(0),
            service: ServiceId(0),
            coin_ids: coins.iter().map(|c| c.id).collect(),
            member_count: coins.len(),
            weight,
            investor: coins.iter().find(|c| c.coin_type.is_investment).map(|c| c.owner).unwrap_or(TraderId(0)),
            next_in_fractal: None,
            prev_in_fractal: None,
            rounds_total: 10,
            rounds_completed: 0,
            dissatisfied_rounds: 0,
            terminated: false,
        }
    }

    fn team(fractal: u64) -> VerificationTeam {
        VerificationTeam::new(FractalId(fractal), vec![TraderId(7), TraderId(8), TraderId(9)]).unwrap()
    }

    fn custody(fractal: u64) -> Custody {
        Custody {
            fractal: FractalId(fractal),
            holder: TraderId(1),
            next: CoinId(2),
            prev: CoinId(3),
            due_checkpoint: 4,
        }
    }

    #[test]
    fn fresh_coin_is_valid() {
        assert_eq!(validate_coin(&coin(1, 1, "1.0", false)), Ok(()));
    }

    #[test]
    fn blocked_without_binding_is_rejected() {
        let mut c = coin(1, 1, "1.0", false);
        c.status = CoinStatus::Blocked;
        assert_eq!(validate_coin(&c), Err(CoinViolation::BindStatusMismatch));
    }

    #[test]
    fn zero_amount_is_rejected() {
        assert_eq!(validate_coin(&coin(1, 1, "0", false)), Err(CoinViolation::BadAmount));
    }

    #[test]
    fn half_linked_coin_dangles() {
        let mut c = coin(1, 1, "1.0", false);
        c.next_in_ring = Some(CoinId(2));
        assert_eq!(validate_coin(&c), Err(CoinViolation::DanglingLink));
    }

    #[test]
    fn running_coin_with_links_is_rejected() {
        let mut c = coin(1, 1, "1.0", false);
        c.next_in_ring = Some(CoinId(2));
        c.prev_in_ring = Some(CoinId(2));
        assert_eq!(validate_coin(&c), Err(CoinViolation::RingStatusMismatch));
    }

    #[test]
    fn weight_examples() {
        let a = coin(1, 1, "1.0", true);
        let b = coin(2, 2, "2.5", false);
        let table: BTreeMap<_, _> = [(a.id, a.clone()), (b.id, b.clone())].into_iter().collect();
        let ring = ring_of(&[&a, &b], Ara::ZERO);
        assert_eq!(ring_weight(&ring, |id| table.get(&id)).unwrap(), "3.5".parse().unwrap());

        let coins: Vec<Coin> = (0..3).map(|i| coin(i, i, "0.45", i == 0)).collect();
        let table: BTreeMap<_, _> = coins.iter().map(|c| (c.id, c.clone())).collect();
        let ring = ring_of(&coins.iter().collect::<Vec<_>>(), Ara::ZERO);
        assert_eq!(ring_weight(&ring, |id| table.get(&id)).unwrap(), "1.35".parse().unwrap());
    }

    #[test]
    fn weight_of_micro_coins_has_no_drift() {
        let coins: Vec<Coin> = (0..1000).map(|i| coin(i, i, "0.000001", i == 0)).collect();
        let table: BTreeMap<_, _> = coins.iter().map(|c| (c.id, c.clone())).collect();
        let ring = ring_of(&coins.iter().collect::<Vec<_>>(), Ara::ZERO);
        // Oracle: integer count of micro units.
        let expected = Ara::from_micros(coins.len() as i64);
        let weight = ring_weight(&ring, |id| table.get(&id)).unwrap();
        assert_eq!(weight, expected);
        assert_eq!(weight, "0.001".parse().unwrap());
    }

    #[test]
    fn weight_reports_unknown_coin() {
        let a = coin(1, 1, "1.0", true);
        let ring = ring_of(&[&a, &coin(9, 2, "1.0", false)], Ara::ZERO);
        let table: BTreeMap<_, _> = [(a.id, a.clone())].into_iter().collect();
        assert_eq!(ring_weight(&ring, |id| table.get(&id)), Err(UnknownCoin(CoinId(9))));
    }

    #[test]
    fn ring_validation_catches_duplicate_owner_and_weight() {
        let a = coin(1, 1, "1.0", true);
        let b = coin(2, 2, "1.0", false);
        let c = coin(3, 2, "1.0", false);
        let table: BTreeMap<_, _> = [&a, &b, &c].iter().map(|x| (x.id, (*x).clone())).collect();
        let dup = ring_of(&[&a, &b, &c], Ara::from_whole(3));
        assert_eq!(
            validate_ring(&dup, |id| table.get(&id)),
            Err(RingViolation::DuplicateOwner(TraderId(2)))
        );
        let bad_weight = ring_of(&[&a, &b], Ara::from_whole(3));
        assert!(matches!(
            validate_ring(&bad_weight, |id| table.get(&id)),
            Err(RingViolation::WeightMismatch { .. })
        ));
        let good = ring_of(&[&a, &b], Ara::from_whole(2));
        assert_eq!(validate_ring(&good, |id| table.get(&id)), Ok(()));
    }

    #[test]
    fn run_to_blocked_by_owning_team() {
        let c = coin(1, 5, "1.0", false);
        let t = team(3);
        let blocked = transition_coin(&c, CoinStatus::Blocked, Authority { team: &t, checkpoint: 1 }, &custody(3)).unwrap();
        assert_eq!(blocked.status, CoinStatus::Blocked);
        assert_eq!(blocked.bind_on, Some(TraderId(1)));
        assert_eq!(validate_coin(&blocked), Ok(()));
    }

    #[test]
    fn terminal_states_are_final() {
        let mut c = coin(1, 5, "1.0", false);
        c.status = CoinStatus::Expired;
        let t = team(3);
        assert_eq!(
            transition_coin(&c, CoinStatus::Run, Authority { team: &t, checkpoint: 1 }, &custody(3)),
            Err(TransitionError::Illegal { from: CoinStatus::Expired, to: CoinStatus::Run })
        );
    }

    #[test]
    fn later_team_may_settle_overdue_coin_only() {
        let c = coin(1, 5, "1.0", false);
        let owner = team(3);
        let blocked = transition_coin(&c, CoinStatus::Blocked, Authority { team: &owner, checkpoint: 1 }, &custody(3)).unwrap();
        let later = team(9);
        assert!(matches!(
            transition_coin(&blocked, CoinStatus::Paid, Authority { team: &later, checkpoint: 4 }, &custody(3)),
            Err(TransitionError::Unauthorized { .. })
        ));
        let paid = transition_coin(&blocked, CoinStatus::Paid, Authority { team: &later, checkpoint: 5 }, &custody(3)).unwrap();
        assert_eq!(paid.status, CoinStatus::Paid);
        assert_eq!(validate_coin(&paid), Ok(()));
        // A foreign team never locks.
        assert!(matches!(
            transition_coin(&c, CoinStatus::Blocked, Authority { team: &later, checkpoint: 9 }, &custody(3)),
            Err(TransitionError::Unauthorized { .. })
        ));
    }

    #[test]
    fn expiry_clears_binding() {
        let c = coin(1, 5, "1.0", true);
        let t = team(3);
        let a = Authority { team: &t, checkpoint: 1 };
        let blocked = transition_coin(&c, CoinStatus::Blocked, a, &custody(3)).unwrap();
        let expired = transition_coin(&blocked, CoinStatus::Expired, a, &custody(3)).unwrap();
        assert_eq!(expired.bind_on, None);
        assert_eq!(validate_coin(&expired), Ok(()));
    }

    #[test]
    fn team_requires_odd_distinct_members() {
        assert_eq!(
            VerificationTeam::new(FractalId(0), vec![TraderId(1), TraderId(2)]),
            Err(TeamError::EvenSize(2))
        );
        assert_eq!(
            VerificationTeam::new(FractalId(0), vec![TraderId(1), TraderId(1), TraderId(2)]),
            Err(TeamError::DuplicateMember(TraderId(1)))
        );
        assert_eq!(team(0).majority(), 2);
    }
}
