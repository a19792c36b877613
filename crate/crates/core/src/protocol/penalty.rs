use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// φ = c / R
    #[default]
    PerRoundR,
    /// φ = c / k² for a ring of k members
    InverseSquare,
    /// φ = c
    Constant,
}

/// Fraction of a member's coin forfeited for each dissatisfied round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySchedule {
    pub mode: PenaltyMode,
    pub c: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        PenaltySchedule { mode: PenaltyMode::PerRoundR, c: 1.0 }
    }
}

impl PenaltySchedule {
    pub fn per_round(c: f64) -> Self {
        PenaltySchedule { mode: PenaltyMode::PerRoundR, c }
    }

    pub fn inverse_square(c: f64) -> Self {
        PenaltySchedule { mode: PenaltyMode::InverseSquare, c }
    }

    pub fn constant(c: f64) -> Self {
        PenaltySchedule { mode: PenaltyMode::Constant, c }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.c) {
            return Err(format!("coefficient {} is outside [0, 1]", self.c));
        }
        Ok(())
    }
}

/// Per-round penalty fraction for a ring of `ring_size` members when a
/// checkpoint holds `rounds` rounds.
pub fn penalty_value(schedule: &PenaltySchedule, ring_size: usize, rounds: u32) -> f64 {
    let phi = match schedule.mode {
        PenaltyMode::PerRoundR => schedule.c / rounds.max(1) as f64,
        PenaltyMode::InverseSquare => schedule.c / (ring_size.max(1) as f64).powi(2),
        PenaltyMode::Constant => schedule.c,
    };
    phi.clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, Error, PartialEq)]
#[error("round-count input `{name}` = {value} must be positive")]
pub struct RoundCountError {
    pub name: &'static str,
    pub value: f64,
}

/// R = ⌈E[ψ] / (K·γ)⌉, at least one.
pub fn compute_round_count(expected_psi: f64, k_regulator: f64, gamma: f64) -> Result<u32, RoundCountError> {
    for (name, value) in [("expected_psi", expected_psi), ("K", k_regulator), ("gamma", gamma)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(RoundCountError { name, value });
        }
    }
    let round_length = k_regulator * gamma;
    let exact = expected_psi / round_length;
    // Absorb representation error so that 100 / (2·5) does not round up to 11.
    let r = (exact - exact * 1e-12).ceil();
    Ok(r.max(1.0) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty_value(&PenaltySchedule::inverse_square(1.0), 2, 10), 0.25);
        assert_eq!(penalty_value(&PenaltySchedule::per_round(1.0), 3, 10), 0.1);
        for k in [2, 5, 40] {
            assert_eq!(penalty_value(&PenaltySchedule::constant(0.05), k, 10), 0.05);
        }
    }

    #[test]
    fn round_count_examples() {
        assert_eq!(compute_round_count(100.0, 2.0, 5.0), Ok(10));
        assert_eq!(compute_round_count(1.0, 1.0, 10.0), Ok(1));
        assert_eq!(compute_round_count(95.0, 3.0, 3.0), Ok(11));
        assert!(compute_round_count(0.0, 1.0, 1.0).is_err());
        assert!(compute_round_count(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn coefficient_range() {
        assert!(PenaltySchedule::constant(1.5).validate().is_err());
        assert!(PenaltySchedule::inverse_square(1.0).validate().is_ok());
    }
}
