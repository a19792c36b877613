use lor_analytics::binomial::{berry_esseen_envelope, exact_wrong_vote_prob};
use lor_analytics::cycles::{
    cycle_counts, cycle_type_census, cycle_type_class_size, sample_two_color_cycles, two_color_cycle_rate,
};
use lor_analytics::degree::{expected_extra_degree, worst_case_degree_bound, DegreeModel};
use lor_analytics::penalty::harmonic;
use lor_core::randomness::HashDraw;

#[test]
fn five_point_census_matches_class_sizes() {
    let census = cycle_type_census(5);
    assert_eq!(census.len(), 7);
    assert_eq!(census.values().sum::<u64>(), 120);
    for (ty, &count) in &census {
        assert_eq!(count, cycle_type_class_size(ty));
    }
    // Exactly one cycle on average of each size i ≤ n, per 1/i · n! permutations.
    for i in 1..=5 {
        let total: u64 = census.iter().map(|(ty, &c)| ty[i] as u64 * c).sum();
        assert_eq!(total * i as u64, 120);
    }
}

#[test]
fn cycle_counts_of_a_known_permutation() {
    // (0 1 2)(3 4)(5)
    let c = cycle_counts(&[1, 2, 0, 4, 3, 5]);
    assert_eq!(c, vec![0, 1, 1, 1, 0, 0, 0]);
}

#[test]
fn two_color_sample_at_the_extremes() {
    let all_good = sample_two_color_cycles(50, 0.0, 3, 20, &HashDraw::from_seed(5));
    for k in 1..=3 {
        for j in 1..=k {
            assert_eq!(all_good.mean(k - j, j), 0.0);
        }
    }
    assert_eq!(two_color_cycle_rate(3, 0, 3, 0.0).unwrap(), 0.0);
}

#[test]
fn normal_approximation_improves_with_team_size() {
    let gap = |k: u64| {
        let (approx, _) = berry_esseen_envelope(k, 0.3).unwrap();
        (exact_wrong_vote_prob(k, 0.3) - approx).abs()
    };
    assert!(gap(401) < gap(25));
}

#[test]
fn extra_degree_grows_with_ell_but_stays_bounded() {
    let mut last = 0.0;
    for ell in 1..=10 {
        let m = DegreeModel::bounding(25, ell);
        let e = expected_extra_degree(&m);
        assert!(e > last);
        assert!(m.predicted_mean_degree() <= worst_case_degree_bound(25, ell));
        last = e;
    }
}

#[test]
fn harmonic_is_continuous_at_the_switch() {
    let below = harmonic(1_000_000);
    let above = harmonic(1_000_001);
    assert!((above - below - 1.0 / 1_000_001.0).abs() < 1e-12);
}
