//! Seeded hash draws and the randomized assembly procedures built on them.
//!
//! Every random choice in a run flows from a [`HashDraw`]: SHA-256 over a
//! 256-bit seed and a 64-bit counter. Ring and fractal assembly additionally
//! key their draws on the content being extended, so a verifier holding the
//! seed material and a snapshot of the pool can re-derive any assembly and
//! compare it bit for bit.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ServiceSpec;
use crate::ids::{FractalId, RingId, TraderId};
use crate::model::{Coin, CoinStatus, CooperationRing, TeamError, VerificationTeam};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashDraw {
    seed: [u8; 32],
    counter: u64,
}

impl HashDraw {
    pub fn new(seed: [u8; 32]) -> Self {
        HashDraw { seed, counter: 0 }
    }

    /// Expands a 64-bit experiment seed into a full state.
    pub fn from_seed(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"lor/seed");
        h.update(seed.to_le_bytes());
        HashDraw::new(h.finalize().into())
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// A fresh state whose seed mixes this state's position with `material`.
    /// Does not advance `self`.
    pub fn derive(&self, material: &[u8]) -> HashDraw {
        let mut h = Sha256::new();
        h.update(b"lor/derive");
        h.update(self.seed);
        h.update(self.counter.to_le_bytes());
        h.update(material);
        HashDraw::new(h.finalize().into())
    }

    /// An independent stream for trial `index`, used to fan out Monte Carlo
    /// trials from one root.
    pub fn fork(&self, index: u64) -> HashDraw {
        self.derive(&index.to_le_bytes())
    }

    pub fn advance(&mut self) {
        self.counter += 1;
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed);
        h.update(self.counter.to_le_bytes());
        let out = h.finalize();
        self.counter += 1;
        u64::from_le_bytes(out[..8].try_into().unwrap())
    }

    /// Uniform integer in `[0, range_n)` by rejection, so there is no
    /// modulo bias.
    pub fn draw(&mut self, range_n: u64) -> u64 {
        assert!(range_n >= 1, "empty draw range");
        if range_n == 1 {
            self.counter += 1;
            return 0;
        }
        let zone = u64::MAX - (u64::MAX % range_n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % range_n;
            }
        }
    }

    pub fn draw_index(&mut self, len: usize) -> usize {
        self.draw(len as u64) as usize
    }

    /// Uniform real in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            self.counter += 1;
            return false;
        }
        if p >= 1.0 {
            self.counter += 1;
            return true;
        }
        self.unit() < p
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.draw_index(i + 1);
            items.swap(i, j);
        }
    }
}

/// Functional form of [`HashDraw::draw`].
pub fn hash_draw(state: &HashDraw, range_n: u64) -> (u64, HashDraw) {
    let mut next = state.clone();
    let v = next.draw(range_n);
    (v, next)
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AssemblyError {
    #[error("coin {0} is not an investment coin")]
    NotInvestment(crate::ids::CoinId),
    #[error("investment coin belongs to {coin} but the catalog entry is {spec}")]
    WrongService { coin: crate::ids::ServiceId, spec: crate::ids::ServiceId },
    #[error("not enough compatible coins or rings in the pool")]
    Starved,
    #[error("start ring {0} is not in the pool")]
    StartNotInPool(RingId),
    #[error("invalid fractal size bounds [{0}, {1}]")]
    InvalidBounds(usize, usize),
}

fn coin_material(coin: &Coin) -> Vec<u8> {
    let mut m = Vec::with_capacity(40);
    m.extend_from_slice(b"coin");
    m.extend_from_slice(&coin.id.get().to_le_bytes());
    m.extend_from_slice(&coin.owner.get().to_le_bytes());
    m.extend_from_slice(&coin.coin_type.service.get().to_le_bytes());
    m.extend_from_slice(&coin.amount.micros().to_le_bytes());
    m.extend_from_slice(&coin.broadcast_at.to_le_bytes());
    m
}

/// Canonical byte encoding of the cooperation-table row, the input of the
/// hash that picks the next ring of a fractal.
pub fn ring_material(ring: &CooperationRing) -> Vec<u8> {
    let mut m = Vec::with_capacity(48 + 8 * ring.coin_ids.len());
    m.extend_from_slice(b"ring");
    m.extend_from_slice(&ring.id.get().to_le_bytes());
    m.extend_from_slice(&ring.service.get().to_le_bytes());
    m.extend_from_slice(&ring.investor.get().to_le_bytes());
    m.extend_from_slice(&ring.weight.micros().to_le_bytes());
    for c in &ring.coin_ids {
        m.extend_from_slice(&c.get().to_le_bytes());
    }
    m
}

/// Picks the worker coins for one investment request.
///
/// Candidates are running worker coins of the investment's service whose
/// owners differ from the investor; each pick removes every other coin of
/// the picked owner so no trader holds two coins in the ring. Returns the
/// ring with the investment coin first, then the workers in pick order.
pub fn assemble_cooperation_ring(
    ring_id: RingId,
    investment_coin: &Coin,
    service: &ServiceSpec,
    pool: &[&Coin],
    rounds_total: u32,
    state: &mut HashDraw,
) -> Result<CooperationRing, AssemblyError> {
    if !investment_coin.coin_type.is_investment {
        return Err(AssemblyError::NotInvestment(investment_coin.id));
    }
    if investment_coin.coin_type.service != service.id {
        return Err(AssemblyError::WrongService {
            coin: investment_coin.coin_type.service,
            spec: service.id,
        });
    }
    let mut candidates: Vec<&Coin> = pool
        .iter()
        .copied()
        .filter(|c| {
            c.status == CoinStatus::Run
                && !c.coin_type.is_investment
                && c.coin_type.service == service.id
                && c.owner != investment_coin.owner
        })
        .collect();
    candidates.sort_by_key(|c| c.id);

    let mut local = state.derive(&coin_material(investment_coin));
    state.advance();

    let needed = service.ring_size - 1;
    let mut coin_ids = Vec::with_capacity(service.ring_size);
    coin_ids.push(investment_coin.id);
    let mut weight = investment_coin.amount;
    for _ in 0..needed {
        if candidates.is_empty() {
            return Err(AssemblyError::Starved);
        }
        let pick = candidates[local.draw_index(candidates.len())];
        coin_ids.push(pick.id);
        weight += pick.amount;
        candidates.retain(|c| c.owner != pick.owner);
    }
    Ok(CooperationRing {
        id: ring_id,
        service: service.id,
        member_count: coin_ids.len(),
        coin_ids,
        weight,
        investor: investment_coin.owner,
        next_in_fractal: None,
        prev_in_fractal: None,
        rounds_total,
        rounds_completed: 0,
        dissatisfied_rounds: 0,
        terminated: false,
    })
}

/// Uniform number of rings for the next fractal, in `[min_ec, max_ec]`.
pub fn fractal_size(state: &mut HashDraw, min_ec: usize, max_ec: usize) -> Result<usize, AssemblyError> {
    if min_ec == 0 || min_ec > max_ec {
        return Err(AssemblyError::InvalidBounds(min_ec, max_ec));
    }
    Ok(min_ec + state.draw_index(max_ec - min_ec + 1))
}

/// Chains `size` distinct rings starting at `start_ring`; each successor is
/// chosen by hashing the content of its predecessor.
pub fn assemble_fractal_ring(
    start_ring: RingId,
    pool: &[&CooperationRing],
    size: usize,
    state: &mut HashDraw,
) -> Result<Vec<RingId>, AssemblyError> {
    let start = pool
        .iter()
        .find(|r| r.id == start_ring)
        .ok_or(AssemblyError::StartNotInPool(start_ring))?;
    if size == 0 || size > pool.len() {
        return Err(AssemblyError::Starved);
    }
    let mut remaining: Vec<&CooperationRing> = pool.iter().copied().filter(|r| r.id != start_ring).collect();
    remaining.sort_by_key(|r| r.id);
    let mut chain = Vec::with_capacity(size);
    chain.push(start.id);
    let mut current: &CooperationRing = start;
    for _ in 1..size {
        let mut local = state.derive(&ring_material(current));
        state.advance();
        current = remaining.remove(local.draw_index(remaining.len()));
        chain.push(current.id);
    }
    Ok(chain)
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TeamSelectionError {
    #[error("team size {kappa} exceeds the {traders} available traders")]
    TooLarge { kappa: usize, traders: usize },
    #[error(transparent)]
    Team(#[from] TeamError),
}

/// Samples κ distinct traders uniformly without replacement.
pub fn select_verification_team(
    fractal: FractalId,
    traders: &[TraderId],
    kappa: usize,
    state: &mut HashDraw,
) -> Result<VerificationTeam, TeamSelectionError> {
    if kappa.is_multiple_of(2) {
        return Err(TeamError::EvenSize(kappa).into());
    }
    if kappa > traders.len() {
        return Err(TeamSelectionError::TooLarge { kappa, traders: traders.len() });
    }
    let members = if 2 * kappa > traders.len() {
        let mut all = traders.to_vec();
        for i in 0..kappa {
            let j = i + state.draw_index(all.len() - i);
            all.swap(i, j);
        }
        all.truncate(kappa);
        all
    } else {
        let mut taken = HashSet::with_capacity(kappa);
        let mut members = Vec::with_capacity(kappa);
        while members.len() < kappa {
            let i = state.draw_index(traders.len());
            if taken.insert(i) {
                members.push(traders[i]);
            }
        }
        members
    };
    Ok(VerificationTeam::new(fractal, members)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ara::Ara;
    use crate::ids::{CoinId, ServiceId};
    use crate::model::CoinType;

    /// |observed - expected| measured in binomial standard errors.
    fn z_score(hits: u64, trials: u64, p: f64) -> f64 {
        let expected = trials as f64 * p;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        (hits as f64 - expected).abs() / sd
    }

    #[test]
    fn single_outcome_range() {
        let mut s = HashDraw::from_seed(3);
        for _ in 0..10 {
            assert_eq!(s.draw(1), 0);
        }
    }

    #[test]
    fn draws_are_deterministic() {
        let s = HashDraw::from_seed(42);
        let (a, next_a) = hash_draw(&s, 1000);
        let (b, next_b) = hash_draw(&s, 1000);
        assert_eq!(a, b);
        assert_eq!(next_a, next_b);
        assert_ne!(HashDraw::from_seed(42).next_u64(), HashDraw::from_seed(43).next_u64());
    }

    #[test]
    fn die_faces_are_uniform() {
        let mut s = HashDraw::from_seed(7);
        let mut faces = [0u64; 6];
        let n = 100_000;
        for _ in 0..n {
            faces[s.draw(6) as usize] += 1;
        }
        for &f in &faces {
            assert!(z_score(f, n, 1.0 / 6.0) < 4.0, "{faces:?}");
        }
        // Chi-square with 5 degrees of freedom; 20.5 is the 0.999 quantile.
        let expected = n as f64 / 6.0;
        let chi2: f64 = faces.iter().map(|&f| (f as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 20.5, "chi2 = {chi2}");
    }

    fn service(size: usize) -> ServiceSpec {
        ServiceSpec { id: ServiceId(1), unit_price: Ara::from_whole(1), ring_size: size, weight: 1 }
    }

    fn worker(id: u64, owner: u64) -> Coin {
        Coin::fresh(CoinId(id), TraderId(owner), CoinType::worker(ServiceId(1)), Ara::from_whole(1), 0)
    }

    fn investment(id: u64, owner: u64) -> Coin {
        Coin::fresh(CoinId(id), TraderId(owner), CoinType::investment(ServiceId(1)), Ara::from_whole(1), 0)
    }

    #[test]
    fn forced_ring_choice() {
        let inv = investment(0, 0);
        let workers = [worker(1, 1), worker(2, 2)];
        let pool: Vec<&Coin> = workers.iter().collect();
        let ring = assemble_cooperation_ring(RingId(0), &inv, &service(3), &pool, 10, &mut HashDraw::from_seed(1)).unwrap();
        let mut members = ring.coin_ids.clone();
        members.sort();
        assert_eq!(members, vec![CoinId(0), CoinId(1), CoinId(2)]);
        assert_eq!(ring.weight, Ara::from_whole(3));
        assert_eq!(ring.investor, TraderId(0));
    }

    #[test]
    fn ring_starves_without_compatible_workers() {
        let inv = investment(0, 0);
        let mut other = worker(1, 1);
        other.coin_type.service = ServiceId(9);
        // Own coin and foreign-service coin do not count.
        let own = worker(2, 0);
        let pool = vec![&other, &own];
        assert_eq!(
            assemble_cooperation_ring(RingId(0), &inv, &service(2), &pool, 10, &mut HashDraw::from_seed(1)),
            Err(AssemblyError::Starved)
        );
    }

    #[test]
    fn ring_never_takes_two_coins_of_one_owner() {
        let inv = investment(0, 0);
        let workers: Vec<Coin> = (1..=6).map(|i| worker(i, 1 + i % 2)).collect();
        let pool: Vec<&Coin> = workers.iter().collect();
        let mut s = HashDraw::from_seed(5);
        for _ in 0..50 {
            let ring = assemble_cooperation_ring(RingId(0), &inv, &service(3), &pool, 10, &mut s).unwrap();
            let owners: HashSet<u64> = ring.coin_ids[1..].iter().map(|c| 1 + c.get() % 2).collect();
            assert_eq!(owners.len(), 2);
        }
        assert_eq!(
            assemble_cooperation_ring(RingId(0), &inv, &service(4), &pool, 10, &mut s),
            Err(AssemblyError::Starved)
        );
    }

    #[test]
    fn worker_selection_is_uniform() {
        let inv = investment(0, 0);
        let workers: Vec<Coin> = (1..=10).map(|i| worker(i, i)).collect();
        let pool: Vec<&Coin> = workers.iter().collect();
        let mut s = HashDraw::from_seed(11);
        let trials = 10_000u64;
        let mut hits = [0u64; 11];
        for _ in 0..trials {
            let ring = assemble_cooperation_ring(RingId(0), &inv, &service(3), &pool, 10, &mut s).unwrap();
            for c in &ring.coin_ids[1..] {
                hits[c.get() as usize] += 1;
            }
        }
        // Two picks out of ten coins per ring: 1/10 per pick, so each coin
        // lands in a ring with probability 2/10.
        for &h in &hits[1..] {
            assert!(z_score(h, trials, 0.2) < 4.0, "{hits:?}");
        }
    }

    #[test]
    fn fractal_size_bounds() {
        let mut s = HashDraw::from_seed(2);
        for _ in 0..100 {
            let v = fractal_size(&mut s, 500, 2000).unwrap();
            assert!((500..=2000).contains(&v));
        }
        assert_eq!(fractal_size(&mut s, 5, 5), Ok(5));
        assert_eq!(fractal_size(&mut s, 6, 5), Err(AssemblyError::InvalidBounds(6, 5)));
        assert_eq!(fractal_size(&mut s, 0, 5), Err(AssemblyError::InvalidBounds(0, 5)));
    }

    #[test]
    fn fractal_size_is_uniform() {
        let mut s = HashDraw::from_seed(9);
        let n = 100_000u64;
        let mut counts = [0u64; 5];
        for _ in 0..n {
            counts[fractal_size(&mut s, 1, 4).unwrap()] += 1;
        }
        for &c in &counts[1..] {
            assert!(z_score(c, n, 0.25) < 4.0, "{counts:?}");
        }
    }

    fn pool_rings(n: u64) -> Vec<CooperationRing> {
        (0..n)
            .map(|i| CooperationRing {
                id: RingId(i),
                service: ServiceId(1),
                coin_ids: vec![CoinId(2 * i), CoinId(2 * i + 1)],
                member_count: 2,
                weight: Ara::from_whole(2),
                investor: TraderId(i),
                next_in_fractal: None,
                prev_in_fractal: None,
                rounds_total: 10,
                rounds_completed: 0,
                dissatisfied_rounds: 0,
                terminated: false,
            })
            .collect()
    }

    #[test]
    fn fractal_chain_cases() {
        let rings = pool_rings(8);
        let pool: Vec<&CooperationRing> = rings.iter().collect();
        let mut s = HashDraw::from_seed(4);
        assert_eq!(assemble_fractal_ring(RingId(3), &pool, 1, &mut s).unwrap(), vec![RingId(3)]);

        let full = assemble_fractal_ring(RingId(3), &pool, 8, &mut s).unwrap();
        assert_eq!(full[0], RingId(3));
        let mut sorted = full.clone();
        sorted.sort();
        assert_eq!(sorted, (0..8).map(RingId).collect::<Vec<_>>());

        let a = assemble_fractal_ring(RingId(0), &pool, 5, &mut HashDraw::from_seed(77)).unwrap();
        let b = assemble_fractal_ring(RingId(0), &pool, 5, &mut HashDraw::from_seed(77)).unwrap();
        assert_eq!(a, b);

        assert_eq!(assemble_fractal_ring(RingId(0), &pool, 9, &mut s), Err(AssemblyError::Starved));
        assert_eq!(
            assemble_fractal_ring(RingId(42), &pool, 2, &mut s),
            Err(AssemblyError::StartNotInPool(RingId(42)))
        );
    }

    #[test]
    fn team_cases() {
        let traders: Vec<TraderId> = (0..10).map(TraderId).collect();
        let mut s = HashDraw::from_seed(8);
        let all = select_verification_team(FractalId(0), &traders[..9], 9, &mut s).unwrap();
        let mut m = all.members().to_vec();
        m.sort();
        assert_eq!(m, traders[..9].to_vec());
        assert_eq!(
            select_verification_team(FractalId(0), &traders, 4, &mut s),
            Err(TeamSelectionError::Team(TeamError::EvenSize(4)))
        );
        assert_eq!(
            select_verification_team(FractalId(0), &traders, 11, &mut s),
            Err(TeamSelectionError::TooLarge { kappa: 11, traders: 10 })
        );
    }

    #[test]
    fn team_membership_is_uniform() {
        let traders: Vec<TraderId> = (0..10).map(TraderId).collect();
        let mut s = HashDraw::from_seed(21);
        let trials = 100_000u64;
        let mut hits = [0u64; 10];
        for _ in 0..trials {
            let team = select_verification_team(FractalId(0), &traders, 3, &mut s).unwrap();
            for m in team.members() {
                hits[m.get() as usize] += 1;
            }
        }
        // Hypergeometric marginal: each trader sits on a team with probability 3/10.
        for &h in &hits {
            assert!(z_score(h, trials, 0.3) < 4.0, "{hits:?}");
        }
    }
}
