//! Expected penalty per trader.

use lor_core::protocol::{PenaltyMode, PenaltySchedule};

use crate::AnalyticsError;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest N for which H_N is summed exactly.
pub const HARMONIC_EXACT_LIMIT: u64 = 1_000_000;

/// H_N. Summed for N ≤ 10⁶, otherwise ln N + γ + 1/(2N) − 1/(12N²), whose
/// error is below 1/(120N⁴).
pub fn harmonic(n: u64) -> f64 {
    if n <= HARMONIC_EXACT_LIMIT {
        // Smallest terms first.
        (1..=n).rev().map(|k| 1.0 / k as f64).sum()
    } else {
        let x = n as f64;
        x.ln() + EULER_GAMMA + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x)
    }
}

/// Ring sizes the bound is taken over.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SizeRegime {
    /// Any size up to N; needs φ(k) = c/k².
    Unbounded,
    /// Sizes up to L with a size-independent φ; `factor` stands for the
    /// unspecified f(α) and defaults to α.
    Bounded { max_size: u64, factor: Option<f64> },
}

/// Upper bound on the expected penalty fraction of a trader.
///
/// Unbounded: (α·c/N)·H_N. Bounded: factor·φ / (N^(1−1/L) − 1).
pub fn expected_penalty_bound(
    n: u64,
    alpha: f64,
    schedule: &PenaltySchedule,
    regime: SizeRegime,
) -> Result<f64, AnalyticsError> {
    if n < 2 {
        return Err(AnalyticsError::InvalidInput(format!("N = {n} is below 2")));
    }
    match regime {
        SizeRegime::Unbounded => {
            if schedule.mode != PenaltyMode::InverseSquare {
                return Err(AnalyticsError::InvalidInput("the unbounded bound needs φ = c/k²".into()));
            }
            Ok(alpha * schedule.c / n as f64 * harmonic(n))
        }
        SizeRegime::Bounded { max_size, factor } => {
            if max_size <= 1 {
                return Err(AnalyticsError::InvalidInput(format!("L = {max_size} leaves a zero denominator")));
            }
            if schedule.mode != PenaltyMode::Constant {
                return Err(AnalyticsError::InvalidInput("the bounded bound needs a constant φ".into()));
            }
            let denom = (n as f64).powf(1.0 - 1.0 / max_size as f64) - 1.0;
            Ok(factor.unwrap_or(alpha) * schedule.c / denom)
        }
    }
}
