use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{wrongdoer_round_action, RoundAction};
use crate::ara::Ara;
use crate::config::{ConfigError, RingFormation, SimConfig};
use crate::ids::{CoinId, FractalId, RingId, TraderId};
use crate::ledger::{
    LedgerError, LedgerParams, PayoutReport, SettlementPolicy, SubmissionOutcome, Tcb, Vote,
};
use crate::model::{Coin, CoinStatus, CoinType, CooperationRing, FractalStatus, VerificationTeam};
use crate::randomness::{
    assemble_cooperation_ring, assemble_fractal_ring, fractal_size, select_verification_team, AssemblyError,
    HashDraw, TeamSelectionError,
};

use super::clock::{Clock, RoundOutcome};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Team(#[from] TeamSelectionError),
}

/// What happened at one checkpoint and in the rounds that followed it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetrics {
    pub checkpoint: u64,
    pub team_decisions: u64,
    pub wrong_decisions: u64,
    pub wrong_votes: u64,
    pub submitted: u64,
    pub rejected: u64,
    pub terminations: u64,
    pub payouts: Ara,
    pub penalties: Ara,
    pub burned: Ara,
    pub active_rings: u64,
    pub active_fractals: u64,
}

/// Running totals over the whole run. All fields add, so tallies from
/// independent trials merge in any order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tallies {
    /// Team decisions on fractal submissions.
    pub submission_decisions: u64,
    pub submission_wrong: u64,
    /// Team decisions on ring validity during rounds.
    pub round_decisions: u64,
    pub round_wrong: u64,
    pub votes: u64,
    pub wrong_votes: u64,
    pub terminations: u64,
    pub rejected_double: u64,
    /// Settled ring memberships and the sum of their penalty fractions.
    pub memberships: u64,
    pub penalty_fraction_sum: f64,
}

impl Tallies {
    pub fn merge(&mut self, other: &Tallies) {
        self.submission_decisions += other.submission_decisions;
        self.submission_wrong += other.submission_wrong;
        self.round_decisions += other.round_decisions;
        self.round_wrong += other.round_wrong;
        self.votes += other.votes;
        self.wrong_votes += other.wrong_votes;
        self.terminations += other.terminations;
        self.rejected_double += other.rejected_double;
        self.memberships += other.memberships;
        self.penalty_fraction_sum += other.penalty_fraction_sum;
    }

    pub fn mean_penalty_fraction(&self) -> f64 {
        if self.memberships == 0 {
            0.0
        } else {
            self.penalty_fraction_sum / self.memberships as f64
        }
    }
}

/// One seeded trial. Owns the ledger and the single draw stream every
/// random choice comes from, so a configuration replays exactly.
#[derive(Clone, Debug)]
pub struct Simulation {
    cfg: SimConfig,
    tcb: Tcb,
    policy: SettlementPolicy,
    draw: HashDraw,
    next_checkpoint: u64,
    proposals: Vec<FractalId>,
    /// Registered rings not yet submitted.
    pooled: BTreeSet<RingId>,
    /// Coins referenced by a registered ring.
    committed: HashSet<CoinId>,
    /// Team members who voted against their team's majority since the last
    /// sanction step.
    dissent: BTreeSet<TraderId>,
    initial_holdings: BTreeMap<TraderId, Ara>,
    current: CheckpointMetrics,
    metrics: Vec<CheckpointMetrics>,
    tallies: Tallies,
    submissions: Vec<SubmissionOutcome>,
    payouts: Vec<(u64, PayoutReport)>,
}

impl Simulation {
    /// Validates the configuration and creates the genesis population.
    /// Each trader is a wrongdoer independently with probability `alpha`.
    pub fn new(cfg: SimConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        let mut tcb = Tcb::new(LedgerParams::from_config(&cfg));
        let mut draw = HashDraw::from_seed(cfg.seed);
        let mut initial_holdings = BTreeMap::new();
        for _ in 0..cfg.traders {
            let wrongdoer = draw.bernoulli(cfg.alpha);
            let id = tcb.add_genesis_trader(cfg.genesis_balance, !wrongdoer);
            initial_holdings.insert(id, cfg.genesis_balance);
        }
        Ok(Simulation {
            policy: SettlementPolicy::from_config(&cfg),
            cfg,
            tcb,
            draw,
            next_checkpoint: 0,
            proposals: Vec::new(),
            pooled: BTreeSet::new(),
            committed: HashSet::new(),
            dissent: BTreeSet::new(),
            initial_holdings,
            current: CheckpointMetrics::default(),
            metrics: Vec::new(),
            tallies: Tallies::default(),
            submissions: Vec::new(),
            payouts: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn tcb(&self) -> &Tcb {
        &self.tcb
    }

    /// Direct ledger access for scenario scripts.
    pub fn tcb_mut(&mut self) -> &mut Tcb {
        &mut self.tcb
    }

    pub fn draw_mut(&mut self) -> &mut HashDraw {
        &mut self.draw
    }

    pub fn adversary_mut(&mut self) -> &mut crate::adversary::AdversaryPolicy {
        &mut self.cfg.adversary
    }

    pub fn next_checkpoint(&self) -> u64 {
        self.next_checkpoint
    }

    pub fn metrics(&self) -> &[CheckpointMetrics] {
        &self.metrics
    }

    pub fn tallies(&self) -> &Tallies {
        &self.tallies
    }

    pub fn submissions(&self) -> &[SubmissionOutcome] {
        &self.submissions
    }

    /// Settlement reports tagged with the checkpoint they happened at.
    pub fn payouts(&self) -> &[(u64, PayoutReport)] {
        &self.payouts
    }

    pub fn proposals(&self) -> &[FractalId] {
        &self.proposals
    }

    pub fn pooled_rings(&self) -> &BTreeSet<RingId> {
        &self.pooled
    }

    pub fn is_wrongdoer(&self, trader: TraderId) -> bool {
        self.tcb.trader(trader).is_some_and(|t| !t.reliable)
    }

    pub fn wrongdoers(&self) -> Vec<TraderId> {
        self.tcb.traders().filter(|t| !t.reliable).map(|t| t.id).collect()
    }

    /// Balance plus the value of the trader's running and blocked coins.
    pub fn holdings(&self, trader: TraderId) -> Ara {
        let Some(t) = self.tcb.trader(trader) else {
            return Ara::ZERO;
        };
        let held: Ara = t
            .coins_owned
            .iter()
            .filter_map(|c| self.tcb.coin(*c))
            .filter(|c| !c.status.is_terminal())
            .map(|c| c.amount)
            .sum();
        t.balance + held
    }

    /// Change in holdings since genesis (or since entrance, which starts
    /// from zero).
    pub fn holdings_delta(&self, trader: TraderId) -> Ara {
        self.holdings(trader) - self.initial_holdings.get(&trader).copied().unwrap_or(Ara::ZERO)
    }

    /// Admits a newcomer who buys `amount` from `seller`.
    pub fn add_entrant(&mut self, seller: TraderId, amount: Ara, reliable: bool) -> Result<TraderId, EngineError> {
        let id = self.tcb.entrance(amount, seller, reliable)?;
        self.initial_holdings.insert(id, Ara::ZERO);
        Ok(id)
    }

    /// Registers a ring and marks its coins as taken.
    pub fn pool_ring(&mut self, ring: CooperationRing) -> Result<RingId, EngineError> {
        let coins = ring.coin_ids.clone();
        let id = self.tcb.register_ring(ring)?;
        self.committed.extend(coins);
        self.pooled.insert(id);
        Ok(id)
    }

    fn drop_ring(&mut self, ring: RingId) -> Result<(), EngineError> {
        if let Some(r) = self.tcb.ring(ring) {
            for c in r.coin_ids.clone() {
                self.committed.remove(&c);
            }
        }
        self.tcb.dissolve_ring(ring)?;
        self.pooled.remove(&ring);
        Ok(())
    }

    /// Adds an externally built proposal to the next submission batch.
    pub fn push_proposal(&mut self, fractal: FractalId) {
        self.proposals.push(fractal);
    }

    fn team_wrongdoers(&self, team: &VerificationTeam) -> usize {
        team.members().iter().filter(|&&m| self.is_wrongdoer(m)).count()
    }

    /// A team whose wrongdoers hold the majority and misbehave as verifiers
    /// does not settle its own fractal.
    fn is_defunct(&self, team: &VerificationTeam) -> bool {
        self.cfg.adversary.vt_misvote_prob > 0.0 && self.team_wrongdoers(team) >= team.majority()
    }

    /// Casts the team's ballot on a question whose true answer is `truth`.
    /// Honest members vote the truth; wrongdoers flip with the misvote
    /// probability. Members who end up against the majority are recorded
    /// for sanction.
    fn cast_votes(&mut self, team: &VerificationTeam, truth: bool) -> (Vec<Vote>, bool) {
        let misvote = self.cfg.adversary.vt_misvote_prob;
        let mut votes = Vec::with_capacity(team.size());
        for &m in team.members() {
            let mut approve = truth;
            if self.is_wrongdoer(m) && self.draw.bernoulli(misvote) {
                approve = !truth;
            }
            votes.push(Vote { member: m, approve });
        }
        let approvals = votes.iter().filter(|v| v.approve).count();
        let decision = approvals >= team.majority();
        let wrong = votes.iter().filter(|v| v.approve != truth).count() as u64;
        for v in &votes {
            if v.approve != decision {
                self.dissent.insert(v.member);
            }
        }
        self.tallies.votes += votes.len() as u64;
        self.tallies.wrong_votes += wrong;
        self.current.wrong_votes += wrong;
        self.current.team_decisions += 1;
        if decision != truth {
            self.current.wrong_decisions += 1;
        }
        (votes, decision)
    }

    fn record_payouts(&mut self, report: PayoutReport) {
        self.current.payouts += report.total_payout();
        self.current.penalties += report.total_penalty();
        self.current.burned += report.total_burned();
        for ring in &report.settled {
            for m in &ring.members {
                self.tallies.memberships += 1;
                self.tallies.penalty_fraction_sum += m.penalty_fraction;
            }
        }
        if !report.settled.is_empty() || !report.postponed.is_empty() {
            self.payouts.push((self.next_checkpoint, report));
        }
    }

    /// Steps 1 to 5 of the checkpoint process at the next checkpoint.
    pub fn run_checkpoint_process(&mut self) -> Result<(), EngineError> {
        let cp = self.next_checkpoint;
        self.tcb.set_clock(Clock::at_checkpoint(cp));
        self.current = CheckpointMetrics { checkpoint: cp, ..CheckpointMetrics::default() };

        // 1. Verify and submit the proposals formed at the previous checkpoint.
        for fid in std::mem::take(&mut self.proposals) {
            let Some(fractal) = self.tcb.fractal(fid).cloned() else { continue };
            if fractal.status != FractalStatus::Proposed {
                continue;
            }
            let truth = self.tcb.precheck_fractal(fid).is_ok();
            let (votes, decision) = self.cast_votes(&fractal.team, truth);
            self.tallies.submission_decisions += 1;
            if decision != truth {
                self.tallies.submission_wrong += 1;
            }
            let outcome = self.tcb.submit_fractal(fid, &votes)?;
            match &outcome.reason {
                None => {
                    self.current.submitted += 1;
                    for r in &fractal.ring_ids {
                        self.pooled.remove(r);
                    }
                }
                Some(reason) => {
                    self.current.rejected += 1;
                    if reason.is_double_submission() {
                        self.tallies.rejected_double += 1;
                    }
                    // Honest traders drop a ring that can never pass.
                    if let Some(bad) = self.tcb.offending_ring(&fractal.ring_ids, reason) {
                        if self.pooled.contains(&bad) {
                            self.drop_ring(bad)?;
                        }
                    }
                }
            }
            self.submissions.push(outcome);
        }

        // 2. Each team settles what finished in its fractal.
        let open: Vec<FractalId> = self
            .tcb
            .fractals()
            .filter(|f| f.status == FractalStatus::Submitted)
            .filter(|f| self.tcb.rcb(f.id).is_some_and(|rcb| rcb.submitted_at < cp))
            .map(|f| f.id)
            .collect();
        for fid in open {
            let team = self.tcb.fractal(fid).expect("listed").team.clone();
            if self.is_defunct(&team) {
                continue;
            }
            let report = self.tcb.settle_checkpoint(fid, &self.policy)?;
            self.record_payouts(report);
        }

        // 3. A fresh team settles coins left behind by defunct teams.
        if !self.tcb.overdue_rings().is_empty() {
            let traders = self.tcb.trader_ids();
            let fid = self.tcb.next_fractal_id();
            let team = select_verification_team(fid, &traders, self.cfg.kappa, &mut self.draw)?;
            let report = self.tcb.settle_leftovers(&team, &self.policy)?;
            self.record_payouts(report);
        }

        // 4. Bar dissenting team members for the next two checkpoints.
        for t in std::mem::take(&mut self.dissent) {
            self.tcb.bar_trader(t, cp + 2)?;
        }

        // 5. Agents prepare the next epoch.
        match self.cfg.ring_formation {
            RingFormation::Catalog => self.request_catalog_coins()?,
            RingFormation::PermutationFrame => self.draw_permutation_frame()?,
        }
        self.form_fractals()?;
        Ok(())
    }

    /// Runs round `round` (1-based) of the interval after the current
    /// checkpoint for every live ring of every submitted fractal.
    pub fn run_round(&mut self, round: u32) -> Result<Vec<RoundOutcome>, EngineError> {
        let cp = self.tcb.clock().checkpoint;
        self.tcb.set_clock(Clock { checkpoint: cp, round });
        let live: Vec<(FractalId, VerificationTeam, Vec<RingId>)> = self
            .tcb
            .fractals()
            .filter(|f| f.status == FractalStatus::Submitted)
            .map(|f| (f.id, f.team.clone(), f.ring_ids.clone()))
            .collect();
        let policy = self.cfg.adversary;
        let mut outcomes = Vec::new();
        for (_, team, rings) in live {
            for ring_id in rings {
                let ring = self.tcb.ring(ring_id).expect("submitted ring exists");
                if ring.is_finished() {
                    continue;
                }
                let owners: Vec<TraderId> =
                    ring.coin_ids.iter().map(|c| self.tcb.coin(*c).expect("ring coin").owner).collect();
                let mut withheld = false;
                let mut false_dissent = Vec::new();
                for &o in &owners {
                    if !self.is_wrongdoer(o) {
                        continue;
                    }
                    match wrongdoer_round_action(o, ring_id, &policy, &mut self.draw) {
                        RoundAction::Serve => {}
                        RoundAction::Withhold => withheld = true,
                        RoundAction::FalseDissent => false_dissent.push(o),
                    }
                }
                let mut dissenters: Vec<TraderId> = if withheld {
                    owners.iter().copied().filter(|&o| !self.is_wrongdoer(o)).collect()
                } else {
                    Vec::new()
                };
                dissenters.extend(false_dissent);
                dissenters.sort();
                let truth = dissenters.is_empty();
                let (_, decision) = self.cast_votes(&team, truth);
                self.tallies.round_decisions += 1;
                if decision != truth {
                    self.tallies.round_wrong += 1;
                }
                if !decision {
                    self.tallies.terminations += 1;
                    self.current.terminations += 1;
                }
                let outcome = RoundOutcome { ring: ring_id, satisfied: truth && decision, dissenters, team_decision: decision };
                self.tcb.record_round(&outcome)?;
                outcomes.push(outcome);
            }
        }
        Ok(outcomes)
    }

    /// One checkpoint process followed by the R rounds of its interval.
    pub fn step(&mut self) -> Result<(), EngineError> {
        self.run_checkpoint_process()?;
        for r in 1..=self.cfg.rounds {
            self.run_round(r)?;
        }
        self.current.active_fractals =
            self.tcb.fractals().filter(|f| f.status == FractalStatus::Submitted).count() as u64;
        self.current.active_rings = self
            .tcb
            .rings()
            .filter(|r| self.tcb.is_submitted(r.id) && self.tcb.ring_record(r.id).is_some_and(|rec| !rec.settled))
            .count() as u64;
        self.metrics.push(self.current.clone());
        self.next_checkpoint += 1;
        Ok(())
    }

    /// Steps until the configured number of checkpoints has run.
    pub fn run(&mut self) -> Result<(), EngineError> {
        while self.next_checkpoint < self.cfg.checkpoints {
            self.step()?;
        }
        Ok(())
    }

    fn idle(&self, coin: &Coin) -> bool {
        coin.status == CoinStatus::Run && !self.committed.contains(&coin.id)
    }

    /// Every trader tops up to ℓ live coins. The service is picked by
    /// catalog weight and the coin is an investment with probability
    /// 1/ring_size, so investment and worker coins arrive in the ratio
    /// the rings consume them.
    fn request_catalog_coins(&mut self) -> Result<(), EngineError> {
        let catalog = self.cfg.service_catalog.clone();
        let total_weight: u64 = catalog.iter().map(|s| s.weight as u64).sum();
        for t in self.tcb.trader_ids() {
            let trader = self.tcb.trader(t).expect("listed");
            let mut live = trader
                .coins_owned
                .iter()
                .filter(|c| self.tcb.coin(**c).is_some_and(|c| !c.status.is_terminal()))
                .count();
            while live < self.cfg.ell {
                let mut pick = self.draw.draw(total_weight.max(1));
                let spec = catalog
                    .iter()
                    .find(|s| {
                        if pick < s.weight as u64 {
                            true
                        } else {
                            pick -= s.weight as u64;
                            false
                        }
                    })
                    .expect("weights cover the draw");
                let invest = self.draw.bernoulli(1.0 / spec.ring_size as f64);
                if self.tcb.trader(t).expect("listed").balance < spec.unit_price {
                    break;
                }
                let ty = if invest { CoinType::investment(spec.id) } else { CoinType::worker(spec.id) };
                self.tcb.request_coin(t, ty, spec.unit_price)?;
                live += 1;
            }
        }

        for spec in &catalog {
            let mut investments: Vec<Coin> = Vec::new();
            let mut workers: Vec<Coin> = Vec::new();
            for c in self.tcb.coins() {
                if c.coin_type.service == spec.id && self.idle(c) {
                    if c.coin_type.is_investment {
                        investments.push(c.clone());
                    } else {
                        workers.push(c.clone());
                    }
                }
            }
            for inv in investments {
                if workers.len() + 1 < spec.ring_size {
                    break;
                }
                let ring_id = self.tcb.next_ring_id();
                let refs: Vec<&Coin> = workers.iter().collect();
                match assemble_cooperation_ring(ring_id, &inv, spec, &refs, self.cfg.rounds, &mut self.draw) {
                    Ok(ring) => {
                        let taken: HashSet<CoinId> = ring.coin_ids.iter().copied().collect();
                        workers.retain(|w| !taken.contains(&w.id));
                        self.pool_ring(ring)?;
                    }
                    Err(AssemblyError::Starved) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(())
    }

    /// ℓ uniform permutations of the trader set; each cycle of length two
    /// or more becomes a ring of the first catalog service, led by its
    /// first member.
    fn draw_permutation_frame(&mut self) -> Result<(), EngineError> {
        let spec = self.cfg.service_catalog[0].clone();
        let traders = self.tcb.trader_ids();
        let n = traders.len();
        for _ in 0..self.cfg.ell {
            let mut perm: Vec<usize> = (0..n).collect();
            self.draw.shuffle(&mut perm);
            let mut seen = vec![false; n];
            for start in 0..n {
                if seen[start] {
                    continue;
                }
                let mut cycle = Vec::new();
                let mut i = start;
                while !seen[i] {
                    seen[i] = true;
                    cycle.push(traders[i]);
                    i = perm[i];
                }
                if cycle.len() < 2 {
                    continue;
                }
                let funded = cycle
                    .iter()
                    .all(|t| self.tcb.trader(*t).is_some_and(|t| t.balance >= spec.unit_price));
                if !funded {
                    continue;
                }
                let mut coin_ids = Vec::with_capacity(cycle.len());
                for (k, &t) in cycle.iter().enumerate() {
                    let ty = if k == 0 { CoinType::investment(spec.id) } else { CoinType::worker(spec.id) };
                    coin_ids.push(self.tcb.request_coin(t, ty, spec.unit_price)?);
                }
                let id = self.tcb.next_ring_id();
                let weight = Ara::from_micros(spec.unit_price.micros() * cycle.len() as i64);
                self.pool_ring(CooperationRing {
                    id,
                    service: spec.id,
                    member_count: coin_ids.len(),
                    coin_ids,
                    weight,
                    investor: cycle[0],
                    next_in_fractal: None,
                    prev_in_fractal: None,
                    rounds_total: self.cfg.rounds,
                    rounds_completed: 0,
                    dissatisfied_rounds: 0,
                    terminated: false,
                })?;
            }
        }
        Ok(())
    }

    /// Chains pooled rings into fractal proposals and samples a team for
    /// each. Rings left over stay pooled for the next checkpoint.
    fn form_fractals(&mut self) -> Result<(), EngineError> {
        let mut free: Vec<CooperationRing> =
            self.pooled.iter().filter_map(|r| self.tcb.ring(*r).cloned()).collect();
        let traders = self.tcb.trader_ids();
        let (min, max) = (self.cfg.fractal_min, self.cfg.fractal_max);
        while free.len() >= min {
            let size = fractal_size(&mut self.draw, min, max.min(free.len()))?;
            let start = free[self.draw.draw_index(free.len())].id;
            let refs: Vec<&CooperationRing> = free.iter().collect();
            let chain = assemble_fractal_ring(start, &refs, size, &mut self.draw)?;
            let fid = self.tcb.next_fractal_id();
            let team = select_verification_team(fid, &traders, self.cfg.kappa, &mut self.draw)?;
            let creator = free.iter().find(|r| r.id == start).expect("start is free").investor;
            let chosen: HashSet<RingId> = chain.iter().copied().collect();
            free.retain(|r| !chosen.contains(&r.id));
            self.tcb.propose_fractal(fid, chain, creator, team)?;
            self.proposals.push(fid);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AdversaryPolicy;
    use crate::protocol::PenaltySchedule;

    fn small(seed: u64) -> SimConfig {
        SimConfig {
            traders: 60,
            alpha: 0.0,
            kappa: 5,
            ell: 2,
            fractal_min: 2,
            fractal_max: 5,
            seed,
            checkpoints: 4,
            ..SimConfig::default()
        }
    }

    #[test]
    fn empty_run_only_has_genesis() {
        let mut sim = Simulation::new(SimConfig { checkpoints: 0, ..small(1) }).unwrap();
        sim.run().unwrap();
        assert!(sim.metrics().is_empty());
        assert_eq!(sim.tcb().events().len(), 60);
    }

    #[test]
    fn honest_run_has_no_terminations() {
        let mut sim = Simulation::new(small(2)).unwrap();
        sim.run().unwrap();
        let m = sim.metrics();
        assert_eq!(m.len(), 4);
        assert!(m.iter().all(|c| c.terminations == 0 && c.wrong_votes == 0));
        assert!(m[1].submitted > 0);
        assert!(m[2].payouts.is_positive());
        assert!(sim.tcb().audit().is_clean());
    }

    #[test]
    fn proposals_submit_at_the_next_checkpoint() {
        let mut sim = Simulation::new(small(3)).unwrap();
        sim.run_checkpoint_process().unwrap();
        let proposed: Vec<FractalId> = sim.proposals().to_vec();
        assert!(!proposed.is_empty());
        assert!(proposed.iter().all(|f| sim.tcb().fractal(*f).unwrap().status == FractalStatus::Proposed));
        for r in 1..=sim.config().rounds {
            assert!(sim.run_round(r).unwrap().is_empty());
        }
        sim.tcb_mut().set_clock(Clock::at_checkpoint(1));
        sim.next_checkpoint = 1;
        sim.run_checkpoint_process().unwrap();
        assert!(proposed.iter().all(|f| sim.tcb().fractal(*f).unwrap().status == FractalStatus::Submitted));
    }

    #[test]
    fn withholding_wrongdoers_terminate_in_round_one() {
        let cfg = SimConfig {
            alpha: 0.3,
            adversary: AdversaryPolicy { withhold_service_prob: 1.0, ..AdversaryPolicy::default() },
            ..small(4)
        };
        let mut sim = Simulation::new(cfg).unwrap();
        sim.run().unwrap();
        for (_, report) in sim.payouts() {
            for ring in &report.settled {
                let members: Vec<TraderId> = ring.members.iter().map(|m| m.trader).collect();
                let bad = members.iter().any(|t| sim.is_wrongdoer(*t));
                let honest = members.iter().any(|t| !sim.is_wrongdoer(*t));
                if bad && honest {
                    assert!(ring.terminated);
                    assert_eq!(ring.rounds_completed, 0);
                    assert_eq!(ring.dissatisfied_rounds, 1);
                } else if !bad {
                    assert!(!ring.terminated);
                }
            }
        }
        assert!(sim.tallies().terminations > 0);
        assert!(sim.tcb().audit().is_clean());
    }

    #[test]
    fn false_dissent_penalizes_everyone() {
        let cfg = SimConfig {
            alpha: 0.3,
            phi: PenaltySchedule::constant(0.05),
            adversary: AdversaryPolicy { false_dissent_prob: 1.0, ..AdversaryPolicy::default() },
            ..small(5)
        };
        let mut sim = Simulation::new(cfg).unwrap();
        sim.run().unwrap();
        let mut seen = false;
        for (_, report) in sim.payouts() {
            for ring in report.settled.iter().filter(|r| r.terminated) {
                seen = true;
                assert!(ring.members.iter().all(|m| (m.penalty_fraction - 0.05).abs() < 1e-12));
            }
        }
        assert!(seen);
    }

    #[test]
    fn dissenting_members_are_barred() {
        let cfg = SimConfig {
            alpha: 0.3,
            adversary: AdversaryPolicy { vt_misvote_prob: 1.0, ..AdversaryPolicy::default() },
            ..small(6)
        };
        let mut sim = Simulation::new(cfg).unwrap();
        sim.step().unwrap();
        sim.step().unwrap();
        let barred: Vec<&crate::model::Trader> =
            sim.tcb().traders().filter(|t| t.barred_through.is_some()).collect();
        assert!(!barred.is_empty());
        assert!(barred.iter().all(|t| t.barred_through.unwrap() <= 3));
    }

    #[test]
    fn replay_is_identical() {
        let run = || {
            let mut sim = Simulation::new(SimConfig { alpha: 0.2, ..small(7) }).unwrap();
            sim.run().unwrap();
            (sim.tcb().events().to_jsonl(), sim.metrics().to_vec())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn permutation_frame_forms_cycle_rings() {
        let cfg = SimConfig { ring_formation: RingFormation::PermutationFrame, ..small(8) };
        let mut sim = Simulation::new(cfg).unwrap();
        sim.run_checkpoint_process().unwrap();
        let members: usize = sim.tcb().rings().map(|r| r.member_count).sum();
        // Every non-fixed point of each of the ℓ permutations is in a ring.
        assert!(members > 60 && members <= 120);
        assert!(sim.tcb().rings().all(|r| r.member_count >= 2));
    }
}
