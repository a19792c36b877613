use lor_core::adversary::AdversaryPolicy;
use lor_core::config::RingFormation;
use lor_core::protocol::PenaltySchedule;
use lor_core::SimConfig;
use lor_harness::report::run_trials;
use lor_harness::{compare_to_theory, Pooled};

#[test]
fn frame_runs_track_cycle_rates_and_penalty_bound() {
    let cfg = SimConfig {
        traders: 400,
        alpha: 0.1,
        checkpoints: 3,
        seed: 40,
        phi: PenaltySchedule::inverse_square(1.0),
        ring_formation: RingFormation::PermutationFrame,
        adversary: AdversaryPolicy { withhold_service_prob: 1.0, ..AdversaryPolicy::default() },
        ..SimConfig::default()
    };
    let runs = run_trials(&cfg, 24).unwrap();
    let pooled = Pooled::of(runs.iter().map(|e| &e.report));
    let rows = compare_to_theory(&pooled, &cfg);
    let names: Vec<&str> = rows.iter().map(|r| r.quantity.as_str()).collect();
    for name in ["rings_of_size_2", "rings_of_size_5", "mean_penalty_fraction", "mean_degree"] {
        assert!(names.contains(&name), "{names:?}");
    }
    for r in rows.iter().filter(|r| r.quantity.starts_with("rings_of_size") || r.quantity == "mean_penalty_fraction") {
        assert!(r.within(4.0), "{r:?}");
    }
}

#[test]
fn misvoting_teams_fail_at_the_predicted_rate() {
    let cfg = SimConfig {
        traders: 300,
        kappa: 5,
        alpha: 0.3,
        checkpoints: 4,
        seed: 70,
        fractal_min: 2,
        fractal_max: 5,
        adversary: AdversaryPolicy { vt_misvote_prob: 1.0, ..AdversaryPolicy::default() },
        ..SimConfig::default()
    };
    let runs = run_trials(&cfg, 16).unwrap();
    let pooled = Pooled::of(runs.iter().map(|e| &e.report));
    let rate = &compare_to_theory(&pooled, &cfg)[0];
    assert!(rate.samples > 1000, "{rate:?}");
    assert!(rate.within(4.0), "{rate:?}");
    assert!(runs.iter().all(|e| e.report.audit.is_clean()));
}
