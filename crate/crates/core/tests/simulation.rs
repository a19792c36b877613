use lor_core::adversary::{inject_attack, AdversaryPolicy, AttackScenario};
use lor_core::config::RingFormation;
use lor_core::protocol::PenaltySchedule;
use lor_core::{Ara, SimConfig, Simulation};
use proptest::prelude::*;

fn config(seed: u64) -> SimConfig {
    SimConfig {
        traders: 120,
        kappa: 5,
        alpha: 0.2,
        fractal_min: 2,
        fractal_max: 5,
        checkpoints: 5,
        seed,
        adversary: AdversaryPolicy {
            withhold_service_prob: 0.2,
            false_dissent_prob: 0.1,
            vt_misvote_prob: 0.5,
            ..AdversaryPolicy::default()
        },
        ..SimConfig::default()
    }
}

#[test]
fn same_seed_same_log() {
    let run = |seed| {
        let mut sim = Simulation::new(config(seed)).unwrap();
        sim.run().unwrap();
        (sim.tcb().events().to_jsonl(), sim.metrics().to_vec())
    };
    assert_eq!(run(8), run(8));
    assert_ne!(run(8).0, run(9).0);
}

#[test]
fn every_scenario_leaves_clean_books() {
    for scenario in AttackScenario::ALL {
        let cfg = SimConfig { adversary: AdversaryPolicy { sybil_budget: Ara::from_whole(3), ..config(1).adversary }, ..config(1) };
        let mut sim = Simulation::new(cfg).unwrap();
        let report = inject_attack(scenario, &mut sim).unwrap();
        assert!(report.audit.is_clean(), "{scenario}: {:?}", report.audit);
        assert_eq!(report.payouts_without_lock, 0, "{scenario}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn audits_stay_clean_at_every_checkpoint(
        seed in 0u64..1000,
        alpha in 0.0f64..0.45,
        withhold in 0.0f64..1.0,
        dissent in 0.0f64..0.5,
        misvote in 0.0f64..1.0,
        frame in any::<bool>(),
        inverse_square in any::<bool>(),
    ) {
        let cfg = SimConfig {
            alpha,
            ring_formation: if frame { RingFormation::PermutationFrame } else { RingFormation::Catalog },
            phi: if inverse_square { PenaltySchedule::inverse_square(1.0) } else { PenaltySchedule::per_round(1.0) },
            adversary: AdversaryPolicy {
                withhold_service_prob: withhold,
                false_dissent_prob: dissent,
                vt_misvote_prob: misvote,
                ..AdversaryPolicy::default()
            },
            ..config(seed)
        };
        let mut sim = Simulation::new(cfg).unwrap();
        for _ in 0..5 {
            sim.step().unwrap();
            let audit = sim.tcb().audit();
            prop_assert!(audit.is_clean(), "{:?}", audit);
        }
    }
}
