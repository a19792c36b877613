//! Majority-vote failure probabilities.

use crate::AnalyticsError;

/// Constant of the Berry–Esseen inequality for sums of Bernoulli variables.
pub const BERRY_ESSEEN_C0: f64 = 0.41;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// ln C(n, k) as a sum of logs of ratios; for moderate n this is far more
/// accurate than going through ln Γ.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|j| ((n - k + j) as f64 / j as f64).ln()).sum()
}

/// log of C(n,k) p^k q^(n-k), with 0·log 0 taken as 0.
fn ln_term(n: u64, k: u64, p: f64, q: f64) -> f64 {
    let mut t = ln_binomial(n, k);
    if k > 0 {
        t += k as f64 * p.ln();
    }
    if n > k {
        t += (n - k) as f64 * q.ln();
    }
    t
}

/// P(Bin(κ, 1−α) ≤ ⌊κ/2⌋): the chance that honest members fail to form a
/// majority of a team of κ when each member is a wrongdoer with
/// probability α.
///
/// Terms are summed in log space around the largest one, which keeps
/// κ in the hundreds exact to about 1e−13 relative error.
pub fn exact_wrong_vote_prob(kappa: u64, alpha: f64) -> f64 {
    assert!(kappa % 2 == 1, "team size must be odd");
    assert!((0.0..=1.0).contains(&alpha), "alpha must be a probability");
    let honest = 1.0 - alpha;
    let logs: Vec<f64> = (0..=kappa / 2).map(|i| ln_term(kappa, i, honest, alpha)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return 0.0;
    }
    let s: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    (top + s.ln()).exp().min(1.0)
}

/// Normal approximation of [`exact_wrong_vote_prob`] and the Berry–Esseen
/// bound on its error.
pub fn berry_esseen_envelope(kappa: u64, alpha: f64) -> Result<(f64, f64), AnalyticsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AnalyticsError::DegenerateAlpha(alpha));
    }
    let k = kappa as f64;
    let sd = (alpha * (1.0 - alpha)).sqrt();
    let z = ((kappa / 2) as f64 / k - (1.0 - alpha)) * k.sqrt() / sd;
    let bound = BERRY_ESSEEN_C0 * (alpha * alpha + (1.0 - alpha).powi(2)) / (sd * k.sqrt());
    Ok((normal_cdf(z), bound))
}

/// Probability that a given ring of size k holds at least one wrongdoer,
/// scaled by 1/N, and its linear bound αk/N.
pub fn bad_ring_probability(k: u64, alpha: f64, n: u64) -> (f64, f64) {
    let exact = (1.0 - (1.0 - alpha).powi(k as i32)) / n as f64;
    let bound = alpha * k as f64 / n as f64;
    debug_assert!(exact <= bound + 1e-15);
    (exact, bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sum over all 2^κ vote patterns.
    fn enumerate(kappa: u32, alpha: f64) -> f64 {
        (0u32..1 << kappa)
            .filter(|mask| (mask.count_ones() as u64) <= (kappa as u64) / 2)
            .map(|mask| {
                let honest = mask.count_ones() as i32;
                (1.0 - alpha).powi(honest) * alpha.powi(kappa as i32 - honest)
            })
            .sum()
    }

    #[test]
    fn cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        let d = normal_cdf(1.96) - 0.975_002_104_851_779_6;
        assert!(d.abs() < 1e-12, "{d}");
        for x in [0.1, 0.7, 2.5, 5.0] {
            assert!((normal_cdf(-x) - (1.0 - normal_cdf(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn wrong_vote_examples() {
        assert_eq!(exact_wrong_vote_prob(3, 0.0), 0.0);
        assert!((exact_wrong_vote_prob(3, 0.5) - 0.5).abs() < 1e-15);
        assert!((exact_wrong_vote_prob(5, 0.4) - 0.31744).abs() < 1e-12);
        assert_eq!(exact_wrong_vote_prob(3, 1.0), 1.0);
        for k in [1u32, 3, 7, 11, 15] {
            for a in [0.05, 0.2, 0.45] {
                let (x, y) = (exact_wrong_vote_prob(k as u64, a), enumerate(k, a));
                assert!((x - y).abs() < 1e-12 * y.max(1e-300), "{k} {a} {x} {y}");
            }
        }
        assert!((exact_wrong_vote_prob(15, 0.45) - 0.346_496_074_852_906_23).abs() < 1e-15);
        assert!((exact_wrong_vote_prob(25, 0.3) - 0.017_469_740_526_057_7).abs() < 1e-14);
        // P(Bin(25, 0.1) ≥ 13)
        assert!((exact_wrong_vote_prob(25, 0.1) / 1.620_834_160_2e-7 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn envelope_examples() {
        for k in [3, 25, 101] {
            let (_, b) = berry_esseen_envelope(k, 0.5).unwrap();
            assert!((b - 0.41 / (k as f64).sqrt()).abs() < 1e-15);
        }
        let (approx, b) = berry_esseen_envelope(101, 0.3).unwrap();
        assert!((exact_wrong_vote_prob(101, 0.3) - approx).abs() <= b);
        let (_, b1) = berry_esseen_envelope(25, 0.2).unwrap();
        let (_, b4) = berry_esseen_envelope(100, 0.2).unwrap();
        assert!((b1 / b4 - 2.0).abs() < 1e-12);
        assert!(berry_esseen_envelope(5, 0.0).is_err());
        assert!(berry_esseen_envelope(5, 1.0).is_err());
    }

    #[test]
    fn bad_ring_examples() {
        assert_eq!(bad_ring_probability(4, 0.0, 10).0, 0.0);
        let (e, b) = bad_ring_probability(1, 0.1, 100);
        assert!((e - 0.001).abs() < 1e-15 && (b - 0.001).abs() < 1e-15);
        let (e, b) = bad_ring_probability(3, 0.2, 1000);
        assert!((e - 4.88e-4).abs() < 1e-15);
        assert!((b - 6e-4).abs() < 1e-15);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone(half in 1u64..100, a in 0.01f64..0.48) {
                let k = 2 * half + 1;
                prop_assert!(exact_wrong_vote_prob(k, a + 0.01) >= exact_wrong_vote_prob(k, a));
                prop_assert!(exact_wrong_vote_prob(k + 2, a) <= exact_wrong_vote_prob(k, a));
            }

            #[test]
            fn envelope_holds(half in 1u64..250, step in 1u32..10) {
                let k = 2 * half + 1;
                let a = step as f64 * 0.05;
                let (approx, bound) = berry_esseen_envelope(k, a).unwrap();
                prop_assert!((exact_wrong_vote_prob(k, a) - approx).abs() <= bound);
            }

            #[test]
            fn bad_ring_bound(k in 1u64..50, a in 0.0f64..1.0, n in 1u64..10_000) {
                let (e, b) = bad_ring_probability(k, a, n);
                prop_assert!(e <= b + 1e-15);
            }
        }
    }
}
