//! Wrongdoer behaviour and scripted attacks.
//!
//! A wrongdoer is a trader that does not perform its responsibilities. The
//! policy says how often it withholds service, dissents falsely, or votes
//! against the truth as a team member. Attack scripts drive a
//! [`Simulation`] into a named attack and report the observable that shows
//! whether the protocol held.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ara::Ara;
use crate::ids::{RingId, TraderId};
use crate::ledger::{AuditReport, RejectReason};
use crate::model::{CoinStatus, FractalStatus};
use crate::protocol::{EngineError, Simulation};
use crate::randomness::{select_verification_team, HashDraw};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdversaryPolicy {
    pub withhold_service_prob: f64,
    pub false_dissent_prob: f64,
    pub vt_misvote_prob: f64,
    pub attempt_double_submit: bool,
    pub sybil_budget: Ara,
}

impl Default for AdversaryPolicy {
    fn default() -> Self {
        AdversaryPolicy {
            withhold_service_prob: 0.0,
            false_dissent_prob: 0.0,
            vt_misvote_prob: 0.0,
            attempt_double_submit: false,
            sybil_budget: Ara::ZERO,
        }
    }
}

impl AdversaryPolicy {
    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("withhold_service_prob", self.withhold_service_prob),
            ("false_dissent_prob", self.false_dissent_prob),
            ("vt_misvote_prob", self.vt_misvote_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is not a probability"));
            }
        }
        if self.sybil_budget.is_negative() {
            return Err(format!("sybil_budget {} is negative", self.sybil_budget));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundAction {
    Serve,
    Withhold,
    FalseDissent,
}

/// What a wrongdoer does in one round of one ring. Withholding is tried
/// first, then false dissent.
pub fn wrongdoer_round_action(
    _trader: TraderId,
    _ring: RingId,
    policy: &AdversaryPolicy,
    state: &mut HashDraw,
) -> RoundAction {
    if state.bernoulli(policy.withhold_service_prob) {
        RoundAction::Withhold
    } else if state.bernoulli(policy.false_dissent_prob) {
        RoundAction::FalseDissent
    } else {
        RoundAction::Serve
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackScenario {
    DoubleSpend,
    SybilFlood,
    ResourceTheft,
    LongDelay,
    CentralizationProbe,
}

impl AttackScenario {
    pub const ALL: [AttackScenario; 5] = [
        AttackScenario::DoubleSpend,
        AttackScenario::SybilFlood,
        AttackScenario::ResourceTheft,
        AttackScenario::LongDelay,
        AttackScenario::CentralizationProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackScenario::DoubleSpend => "double_spend",
            AttackScenario::SybilFlood => "sybil_flood",
            AttackScenario::ResourceTheft => "resource_theft",
            AttackScenario::LongDelay => "long_delay",
            AttackScenario::CentralizationProbe => "centralization_probe",
        }
    }
}

impl fmt::Display for AttackScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("unknown attack scenario `{0}`")]
pub struct UnknownScenario(pub String);

impl FromStr for AttackScenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttackScenario::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("scenario needs {0}")]
    Setup(&'static str),
}

impl From<crate::ledger::LedgerError> for AttackError {
    fn from(e: crate::ledger::LedgerError) -> Self {
        AttackError::Engine(e.into())
    }
}

impl From<crate::randomness::TeamSelectionError> for AttackError {
    fn from(e: crate::randomness::TeamSelectionError) -> Self {
        AttackError::Engine(e.into())
    }
}

/// Observables of one scripted attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub scenario: AttackScenario,
    pub attacker: Option<TraderId>,
    /// Submissions the attack tried and how many the ledger accepted.
    pub attempts: u64,
    pub accepted: u64,
    pub rejections: Vec<RejectReason>,
    pub identities_created: u64,
    /// Change of the attacker's own account.
    pub attacker_account_delta: Ara,
    /// Change of everything the attacker controls, including identities.
    pub attacker_net_delta: Ara,
    /// Payouts credited for coins that were never locked.
    pub payouts_without_lock: u64,
    /// Earliest checkpoint at which a long ring paid out, and when it was due.
    pub long_ring_first_payout: Option<u64>,
    pub long_ring_due: Option<u64>,
    pub postponements: u64,
    pub teams_sampled: u64,
    pub captures: u64,
    pub attacker_fraction: f64,
    pub audit: AuditReport,
}

impl AttackReport {
    fn new(scenario: AttackScenario) -> Self {
        AttackReport {
            scenario,
            attacker: None,
            attempts: 0,
            accepted: 0,
            rejections: Vec::new(),
            identities_created: 0,
            attacker_account_delta: Ara::ZERO,
            attacker_net_delta: Ara::ZERO,
            payouts_without_lock: 0,
            long_ring_first_payout: None,
            long_ring_due: None,
            postponements: 0,
            teams_sampled: 0,
            captures: 0,
            attacker_fraction: 0.0,
            audit: AuditReport::default(),
        }
    }
}

/// Teams sampled by the centralization probe.
pub const PROBE_TEAMS: u64 = 100_000;

/// Drives `sim` through `scenario` and then runs it to the configured
/// horizon (at least far enough for the attack to settle).
pub fn inject_attack(scenario: AttackScenario, sim: &mut Simulation) -> Result<AttackReport, AttackError> {
    let mut report = AttackReport::new(scenario);
    match scenario {
        AttackScenario::DoubleSpend => double_spend(sim, &mut report)?,
        AttackScenario::SybilFlood => sybil_flood(sim, &mut report)?,
        AttackScenario::ResourceTheft => resource_theft(sim, &mut report)?,
        AttackScenario::LongDelay => long_delay(sim, &mut report)?,
        AttackScenario::CentralizationProbe => centralization_probe(sim, &mut report)?,
    }
    report.payouts_without_lock = payouts_without_lock(sim);
    report.audit = sim.tcb().audit();
    Ok(report)
}

fn run_until(sim: &mut Simulation, checkpoint: u64) -> Result<(), EngineError> {
    while sim.next_checkpoint() < checkpoint.max(sim.config().checkpoints) {
        sim.step()?;
    }
    Ok(())
}

/// Prepares proposals at the first checkpoint.
fn first_proposals(sim: &mut Simulation) -> Result<(), AttackError> {
    sim.step()?;
    if sim.proposals().is_empty() {
        return Err(AttackError::Setup("at least one proposal after the first checkpoint"));
    }
    Ok(())
}

/// The creator of a proposal offers the same rings again under a second
/// fractal with its own team.
fn double_spend(sim: &mut Simulation, report: &mut AttackReport) -> Result<(), AttackError> {
    sim.adversary_mut().attempt_double_submit = true;
    first_proposals(sim)?;
    let original = sim.proposals()[0];
    let fractal = sim.tcb().fractal(original).expect("proposed").clone();
    let mut rings = fractal.ring_ids.clone();
    rings.reverse();
    let traders = sim.tcb().trader_ids();
    let kappa = sim.config().kappa;
    let copy = sim.tcb_mut().next_fractal_id();
    let team = select_verification_team(copy, &traders, kappa, sim.draw_mut())?;
    sim.tcb_mut().propose_fractal(copy, rings, fractal.creator, team)?;
    sim.push_proposal(copy);
    report.attacker = Some(fractal.creator);
    report.attempts = 2;

    sim.step()?;
    for id in [original, copy] {
        let outcome = sim.submissions().iter().find(|s| s.fractal == id).expect("both were voted on");
        match &outcome.reason {
            None => report.accepted += 1,
            Some(r) => report.rejections.push(r.clone()),
        }
    }
    run_until(sim, 4)?;
    Ok(())
}

/// A wrongdoer spends its budget buying identities at the cheapest price,
/// one entrance each, and every identity then floods coin requests
/// without serving.
fn sybil_flood(sim: &mut Simulation, report: &mut AttackReport) -> Result<(), AttackError> {
    let attacker = sim
        .wrongdoers()
        .first()
        .copied()
        .or_else(|| sim.tcb().trader_ids().first().copied())
        .ok_or(AttackError::Setup("a trader"))?;
    report.attacker = Some(attacker);
    sim.adversary_mut().withhold_service_prob = 1.0;
    let cheapest = sim.tcb().params().cheapest();
    let budget = sim.config().adversary.sybil_budget;
    let wanted = if cheapest.is_positive() { budget.micros() / cheapest.micros() } else { 0 };
    let before_account = sim.tcb().trader(attacker).expect("exists").balance;
    let mut identities = vec![attacker];
    for _ in 0..wanted {
        let id = sim.add_entrant(attacker, cheapest, false)?;
        identities.push(id);
        report.identities_created += 1;
    }
    report.attacker_account_delta = sim.tcb().trader(attacker).expect("exists").balance - before_account;
    run_until(sim, 4)?;
    report.attacker_net_delta = identities.iter().map(|&t| sim.holdings_delta(t)).sum();
    Ok(())
}

/// A wrongdoer slips a coin that was never funded into a proposed ring,
/// hoping to be paid for it.
fn resource_theft(sim: &mut Simulation, report: &mut AttackReport) -> Result<(), AttackError> {
    first_proposals(sim)?;
    let target = sim.proposals()[0];
    let fractal = sim.tcb().fractal(target).expect("proposed").clone();
    let ring_id = fractal.ring_ids[0];
    let attacker = sim.wrongdoers().first().copied().unwrap_or(fractal.creator);
    report.attacker = Some(attacker);
    let phantom = crate::ids::CoinId(u64::MAX - attacker.get());
    let price = {
        let ring = sim.tcb().ring(ring_id).expect("pooled");
        sim.tcb().params().prices.get(&ring.service).copied().unwrap_or(Ara::ZERO)
    };
    let ring = sim.tcb_mut().ring_mut_unchecked(ring_id).ok_or(AttackError::Setup("an unsubmitted ring"))?;
    ring.coin_ids.push(phantom);
    ring.member_count += 1;
    ring.weight += price;
    report.attempts = 1;
    let before = sim.holdings_delta(attacker);
    sim.step()?;
    let outcome = sim.submissions().iter().find(|s| s.fractal == target).expect("voted on");
    match &outcome.reason {
        None => report.accepted += 1,
        Some(r) => report.rejections.push(r.clone()),
    }
    run_until(sim, 4)?;
    report.attacker_net_delta = sim.holdings_delta(attacker) - before;
    Ok(())
}

/// A ring is stretched over three checkpoint intervals; it may not be
/// paid before all its rounds are done.
fn long_delay(sim: &mut Simulation, report: &mut AttackReport) -> Result<(), AttackError> {
    const SPAN: u32 = 3;
    first_proposals(sim)?;
    let target = sim.proposals()[0];
    let ring_id = sim.tcb().fractal(target).expect("proposed").ring_ids[0];
    let rounds = sim.config().rounds;
    let ring = sim.tcb_mut().ring_mut_unchecked(ring_id).ok_or(AttackError::Setup("an unsubmitted ring"))?;
    ring.rounds_total = SPAN * rounds;
    report.attacker = Some(ring.investor);
    report.attempts = 1;
    sim.step()?;
    let outcome = sim.submissions().iter().find(|s| s.fractal == target).expect("voted on");
    if outcome.reason.is_none() {
        report.accepted = 1;
    }
    let submitted_at = sim.next_checkpoint() - 1;
    report.long_ring_due = Some(submitted_at + SPAN as u64);
    run_until(sim, submitted_at + SPAN as u64 + 2)?;
    for (cp, payout) in sim.payouts() {
        if payout.postponed.contains(&ring_id) {
            report.postponements += 1;
        }
        if payout.settled.iter().any(|r| r.ring == ring_id) && report.long_ring_first_payout.is_none() {
            report.long_ring_first_payout = Some(*cp);
        }
    }
    Ok(())
}

/// Samples teams from the population and counts how often the attacker
/// (the wrongdoers) holds a majority.
fn centralization_probe(sim: &mut Simulation, report: &mut AttackReport) -> Result<(), AttackError> {
    let traders = sim.tcb().trader_ids();
    let bad: std::collections::HashSet<TraderId> = sim.wrongdoers().into_iter().collect();
    report.attacker_fraction = bad.len() as f64 / traders.len().max(1) as f64;
    let kappa = sim.config().kappa;
    let mut draw = sim.draw_mut().fork(0xC0FFEE);
    for i in 0..PROBE_TEAMS {
        let team = select_verification_team(crate::ids::FractalId(i), &traders, kappa, &mut draw)?;
        let w = team.members().iter().filter(|m| bad.contains(m)).count();
        if w >= team.majority() {
            report.captures += 1;
        }
    }
    report.teams_sampled = PROBE_TEAMS;
    Ok(())
}

fn payouts_without_lock(sim: &Simulation) -> u64 {
    let tcb = sim.tcb();
    sim.payouts()
        .iter()
        .flat_map(|(_, r)| r.settled.iter())
        .flat_map(|r| r.members.iter())
        .filter(|m| !tcb.status_history(m.coin).contains(&CoinStatus::Blocked))
        .count() as u64
}

/// Fractals the ledger holds in the submitted or settled state.
pub fn accepted_fractals(sim: &Simulation) -> usize {
    sim.tcb()
        .fractals()
        .filter(|f| matches!(f.status, FractalStatus::Submitted | FractalStatus::Settled))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;

    fn cfg(seed: u64) -> SimConfig {
        SimConfig {
            traders: 200,
            alpha: 0.1,
            kappa: 7,
            fractal_min: 2,
            fractal_max: 6,
            seed,
            checkpoints: 3,
            ..SimConfig::default()
        }
    }

    #[test]
    fn all_zero_policy_serves() {
        let mut d = HashDraw::from_seed(1);
        let p = AdversaryPolicy::default();
        for _ in 0..100 {
            assert_eq!(wrongdoer_round_action(TraderId(0), RingId(0), &p, &mut d), RoundAction::Serve);
        }
        let w = AdversaryPolicy { withhold_service_prob: 1.0, ..p };
        assert_eq!(wrongdoer_round_action(TraderId(0), RingId(0), &w, &mut d), RoundAction::Withhold);
        let f = AdversaryPolicy { false_dissent_prob: 1.0, ..p };
        assert_eq!(wrongdoer_round_action(TraderId(0), RingId(0), &f, &mut d), RoundAction::FalseDissent);
    }

    #[test]
    fn policy_probabilities_are_checked() {
        let p = AdversaryPolicy { vt_misvote_prob: 1.5, ..AdversaryPolicy::default() };
        assert!(p.validate().is_err());
        assert!(AdversaryPolicy::default().validate().is_ok());
    }

    #[test]
    fn scenario_names_roundtrip() {
        for s in AttackScenario::ALL {
            assert_eq!(s.name().parse::<AttackScenario>(), Ok(s));
        }
        assert!("eclipse".parse::<AttackScenario>().is_err());
    }

    #[test]
    fn double_spend_admits_one() {
        let mut sim = Simulation::new(cfg(1)).unwrap();
        let r = inject_attack(AttackScenario::DoubleSpend, &mut sim).unwrap();
        assert_eq!((r.attempts, r.accepted), (2, 1));
        assert!(r.rejections[0].is_double_submission());
        assert!(r.audit.is_clean(), "{:?}", r.audit);
    }

    #[test]
    fn sybil_below_cheapest_buys_nothing() {
        let mut c = cfg(2);
        c.adversary.sybil_budget = Ara::from_micros(449_999);
        let mut sim = Simulation::new(c).unwrap();
        let r = inject_attack(AttackScenario::SybilFlood, &mut sim).unwrap();
        assert_eq!(r.identities_created, 0);
        assert!(r.audit.is_clean());
    }

    #[test]
    fn sybil_flood_costs_the_attacker() {
        let mut c = cfg(3);
        c.adversary.sybil_budget = Ara::from_whole(5);
        let mut sim = Simulation::new(c).unwrap();
        let r = inject_attack(AttackScenario::SybilFlood, &mut sim).unwrap();
        assert_eq!(r.identities_created, 11);
        assert_eq!(r.attacker_account_delta, Ara::from_micros(-11 * 450_000));
        assert!(r.attacker_net_delta <= Ara::ZERO);
        assert!(r.audit.is_clean());
    }

    #[test]
    fn phantom_coin_is_not_paid() {
        let mut sim = Simulation::new(cfg(4)).unwrap();
        let r = inject_attack(AttackScenario::ResourceTheft, &mut sim).unwrap();
        assert_eq!(r.accepted, 0);
        assert!(matches!(r.rejections[0], RejectReason::UnknownCoin { .. }));
        assert_eq!(r.payouts_without_lock, 0);
        assert!(r.audit.is_clean());
    }

    #[test]
    fn long_ring_waits_for_its_rounds() {
        let mut sim = Simulation::new(cfg(5)).unwrap();
        let r = inject_attack(AttackScenario::LongDelay, &mut sim).unwrap();
        assert_eq!(r.accepted, 1);
        assert_eq!(r.long_ring_first_payout, r.long_ring_due);
        assert_eq!(r.postponements, 2);
        assert!(r.audit.is_clean());
    }

    #[test]
    fn probe_counts_captures() {
        let mut sim = Simulation::new(SimConfig { alpha: 0.45, kappa: 3, ..cfg(6) }).unwrap();
        let r = inject_attack(AttackScenario::CentralizationProbe, &mut sim).unwrap();
        assert_eq!(r.teams_sampled, PROBE_TEAMS);
        // P(at least 2 of 3) at the realized fraction, loosely.
        let f = r.attacker_fraction;
        let p = 3.0 * f * f * (1.0 - f) + f * f * f;
        let rate = r.captures as f64 / PROBE_TEAMS as f64;
        assert!((rate - p).abs() < 0.02, "{rate} vs {p}");
    }
}
