//! Experiment parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AdversaryPolicy;
use crate::ara::Ara;
use crate::ids::ServiceId;
use crate::protocol::PenaltySchedule;

/// One entry of the service catalog. Every ring of a service has the same
/// size: one investment coin plus `ring_size - 1` worker coins, each of
/// `unit_price`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub id: ServiceId,
    pub unit_price: Ara,
    pub ring_size: usize,
    /// Relative demand used when agents pick a service.
    #[serde(default = "one")]
    pub weight: u32,
}

fn one() -> u32 {
    1
}

/// How cooperation rings come into being.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingFormation {
    /// Agents request coins from the catalog and investors assemble rings
    /// from the pool of running worker coins.
    #[default]
    Catalog,
    /// Each checkpoint draws `ell` independent uniform permutations of the
    /// trader set; every cycle of length two or more becomes a ring.
    PermutationFrame,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    #[serde(rename = "N", alias = "traders")]
    pub traders: usize,
    pub alpha: f64,
    pub kappa: usize,
    pub ell: usize,
    #[serde(rename = "rounds_R", alias = "rounds")]
    pub rounds: u32,
    pub phi: PenaltySchedule,
    pub fractal_min: usize,
    pub fractal_max: usize,
    #[serde(rename = "K_regulator")]
    pub k_regulator: f64,
    pub gamma: f64,
    pub expected_psi: f64,
    pub seed: u64,
    pub checkpoints: u64,
    pub fee_percent: f64,
    pub bonus_rate: f64,
    pub genesis_balance: Ara,
    pub ring_formation: RingFormation,
    pub adversary: AdversaryPolicy,
    pub service_catalog: Vec<ServiceSpec>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            traders: 2000,
            alpha: 0.1,
            kappa: 25,
            ell: 3,
            rounds: 10,
            phi: PenaltySchedule::default(),
            fractal_min: 5,
            fractal_max: 20,
            k_regulator: 1.0,
            gamma: 1.0,
            expected_psi: 10.0,
            seed: 0,
            checkpoints: 5,
            fee_percent: 0.90,
            bonus_rate: 0.0,
            genesis_balance: Ara::from_whole(100),
            ring_formation: RingFormation::Catalog,
            adversary: AdversaryPolicy::default(),
            service_catalog: default_catalog(),
        }
    }
}

pub fn default_catalog() -> Vec<ServiceSpec> {
    vec![
        ServiceSpec { id: ServiceId(0), unit_price: Ara::from_whole(1), ring_size: 2, weight: 1 },
        ServiceSpec { id: ServiceId(1), unit_price: Ara::from_whole(1), ring_size: 3, weight: 2 },
        ServiceSpec { id: ServiceId(2), unit_price: Ara::from_micros(450_000), ring_size: 4, weight: 1 },
    ]
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("invalid `{key}`: {reason}")]
pub struct ConfigError {
    pub key: &'static str,
    pub reason: String,
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError { key, reason: reason.into() }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.traders == 0 {
            return Err(invalid("N", "need at least one trader"));
        }
        if !(0.0..0.5).contains(&self.alpha) {
            return Err(invalid("alpha", format!("{} is outside [0, 0.5)", self.alpha)));
        }
        if self.kappa < 3 || self.kappa.is_multiple_of(2) {
            return Err(invalid("kappa", format!("{} must be odd and at least 3", self.kappa)));
        }
        if self.kappa > self.traders {
            return Err(invalid("kappa", format!("{} exceeds N = {}", self.kappa, self.traders)));
        }
        if self.ell == 0 {
            return Err(invalid("ell", "must be at least 1"));
        }
        if self.rounds == 0 {
            return Err(invalid("rounds_R", "must be at least 1"));
        }
        self.phi.validate().map_err(|reason| invalid("phi", reason))?;
        if self.fractal_min == 0 || self.fractal_min > self.fractal_max {
            return Err(invalid(
                "fractal_min",
                format!("bounds [{}, {}] are not a valid range", self.fractal_min, self.fractal_max),
            ));
        }
        for (key, v) in [
            ("K_regulator", self.k_regulator),
            ("gamma", self.gamma),
            ("expected_psi", self.expected_psi),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(key, format!("{v} must be positive")));
            }
        }
        if !(self.fee_percent > 0.0 && self.fee_percent <= 1.0) {
            return Err(invalid("fee_percent", format!("{} is outside (0, 1]", self.fee_percent)));
        }
        if !(0.0..=1.0).contains(&self.bonus_rate) {
            return Err(invalid("bonus_rate", format!("{} is outside [0, 1]", self.bonus_rate)));
        }
        if self.genesis_balance.is_negative() {
            return Err(invalid("genesis_balance", "must not be negative"));
        }
        self.adversary.validate().map_err(|reason| invalid("adversary", reason))?;
        if self.service_catalog.is_empty() {
            return Err(invalid("service_catalog", "must list at least one service"));
        }
        let mut ids = std::collections::HashSet::new();
        for s in &self.service_catalog {
            if !ids.insert(s.id) {
                return Err(invalid("service_catalog", format!("duplicate service {}", s.id)));
            }
            if !s.unit_price.is_positive() {
                return Err(invalid("service_catalog", format!("{} needs a positive unit price", s.id)));
            }
            if s.ring_size < 2 {
                return Err(invalid("service_catalog", format!("{} ring size must be at least 2", s.id)));
            }
            if s.weight == 0 {
                return Err(invalid("service_catalog", format!("{} weight must be positive", s.id)));
            }
        }
        Ok(())
    }

    pub fn service(&self, id: ServiceId) -> Option<&ServiceSpec> {
        self.service_catalog.iter().find(|s| s.id == id)
    }

    pub fn cheapest_price(&self) -> Ara {
        self.service_catalog
            .iter()
            .map(|s| s.unit_price)
            .min()
            .unwrap_or(Ara::ZERO)
    }

    /// Fee expressed in parts per million, the unit settlement works in.
    pub fn fee_ppm(&self) -> i64 {
        (self.fee_percent * 1e6).round() as i64
    }

    pub fn bonus_ppm(&self) -> i64 {
        (self.bonus_rate * 1e6).round() as i64
    }
}
