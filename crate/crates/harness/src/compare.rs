//! Simulation against closed forms.

use lor_analytics::binomial::exact_wrong_vote_prob;
use lor_analytics::cycles::expected_cycle_count;
use lor_analytics::degree::DegreeModel;
use lor_analytics::penalty::{expected_penalty_bound, SizeRegime};
use lor_analytics::stats::{binomial_std_err, z_score};
use lor_core::config::RingFormation;
use lor_core::protocol::PenaltyMode;
use lor_core::SimConfig;
use serde::{Deserialize, Serialize};

use crate::report::Pooled;

/// Whether the prediction is a point estimate, an upper bound, or only a
/// reference value from a model the run does not follow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Estimate,
    UpperBound,
    Reference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub quantity: String,
    pub kind: Prediction,
    pub observed: f64,
    pub predicted: f64,
    pub std_err: f64,
    pub samples: u64,
    /// `None` when the standard error is zero or there are no samples.
    pub z: Option<f64>,
}

impl Deviation {
    /// Inside `sigmas` standard errors, one-sided for bounds. A row without
    /// a z-score passes only if observation and prediction agree exactly
    /// (or the observation respects the bound).
    pub fn within(&self, sigmas: f64) -> bool {
        match (self.kind, self.z) {
            (Prediction::Reference, _) => true,
            (Prediction::Estimate, Some(z)) => z.abs() <= sigmas,
            (Prediction::UpperBound, Some(z)) => z <= sigmas,
            (Prediction::Estimate, None) => self.observed == self.predicted,
            (Prediction::UpperBound, None) => self.observed <= self.predicted,
        }
    }

    pub fn flagged(&self) -> bool {
        self.z.is_none()
    }
}

fn row(quantity: String, kind: Prediction, observed: f64, predicted: f64, std_err: f64, samples: u64) -> Deviation {
    let z = if samples == 0 { None } else { z_score(observed, predicted, std_err) };
    Deviation { quantity, kind, observed, predicted, std_err, samples, z }
}

/// Rows for the wrong-decision rate, the ring-size counts (frame mode
/// only), the mean degree and the mean penalty fraction.
pub fn compare_to_theory(pooled: &Pooled, cfg: &SimConfig) -> Vec<Deviation> {
    let mut rows = Vec::new();
    let t = &pooled.tallies;

    // A wrongdoer casts a wrong vote with the misvote probability.
    let p_member = cfg.alpha * cfg.adversary.vt_misvote_prob;
    let predicted = exact_wrong_vote_prob(cfg.kappa as u64, p_member);
    let n = t.submission_decisions;
    let observed = if n == 0 { 0.0 } else { t.submission_wrong as f64 / n as f64 };
    // With no spread in the prediction the sample one is the fallback.
    let se = match binomial_std_err(predicted, n) {
        s if s > 0.0 => s,
        _ => binomial_std_err(observed, n),
    };
    rows.push(row("wrong_decision_rate".into(), Prediction::Estimate, observed, predicted, se, n));

    if cfg.ring_formation == RingFormation::PermutationFrame && pooled.frames > 0 {
        let frames = pooled.frames as f64;
        for i in 2..=5usize {
            let lambda = expected_cycle_count(cfg.ell as u64, i as u64);
            let seen = pooled.ring_sizes.get(&i).copied().unwrap_or(0) as f64 / frames;
            rows.push(row(
                format!("rings_of_size_{i}"),
                Prediction::Estimate,
                seen,
                lambda,
                (lambda / frames).sqrt(),
                pooled.frames,
            ));
        }
    }

    // The typical-node degree assumes one team per trader; a live run
    // samples a team per fractal, so it is reported but not judged.
    let model = DegreeModel::bounding(cfg.kappa as u64, cfg.ell as u64);
    rows.push(row(
        "mean_degree".into(),
        Prediction::Reference,
        pooled.degree.mean(),
        model.predicted_mean_degree(),
        pooled.degree.std_err(),
        pooled.degree.n,
    ));

    let regime = match cfg.phi.mode {
        PenaltyMode::InverseSquare => Some(SizeRegime::Unbounded),
        PenaltyMode::Constant => {
            let max_size = cfg.service_catalog.iter().map(|s| s.ring_size).max().unwrap_or(2) as u64;
            Some(SizeRegime::Bounded { max_size, factor: None })
        }
        PenaltyMode::PerRoundR => None,
    };
    if let Some(bound) = regime.and_then(|r| expected_penalty_bound(cfg.traders as u64, cfg.alpha, &cfg.phi, r).ok()) {
        let m = &pooled.penalty_fraction;
        rows.push(row("mean_penalty_fraction".into(), Prediction::UpperBound, m.mean(), bound, m.std_err(), m.n));
    }
    rows
}
