//! Degree of a trader in the static multigraph of one frame: a clique with
//! its verification team, two edges per ring it joins, and links to the
//! members of the fractal its team verifies.
//!
//! A typical trader has degree (κ−1) + 2(ℓ−s) + μ, where s counts the
//! permutations in which it is a fixed point and μ its verification links.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// ζ(2)
pub const ZETA2: f64 = PI * PI / 6.0;
/// ζ(4)
pub const ZETA4: f64 = PI * PI * PI * PI / 90.0;

/// Selection probability of a ring of each size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Xi {
    /// Explicit ξᵢ for finitely many sizes; all other sizes are 0.
    Table(BTreeMap<u64, f64>),
    /// ξᵢ = 1/sinh(ℓ/i) for i ≤ ℓ and 1/i beyond.
    Bounding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeModel {
    pub ell: u64,
    pub kappa: u64,
    pub xi: Xi,
    /// Largest ring size, if bounded.
    pub max_size: Option<u64>,
}

/// Sizes summed term by term before the closed-form tail takes over.
const DIRECT_TERMS: u64 = 100_000;

impl DegreeModel {
    pub fn bounding(kappa: u64, ell: u64) -> Self {
        DegreeModel { ell, kappa, xi: Xi::Bounding, max_size: None }
    }

    pub fn xi(&self, i: u64) -> f64 {
        if i < 2 || self.max_size.is_some_and(|l| i > l) {
            return 0.0;
        }
        match &self.xi {
            Xi::Table(t) => t.get(&i).copied().unwrap_or(0.0),
            Xi::Bounding if i <= self.ell => 1.0 / (self.ell as f64 / i as f64).sinh(),
            Xi::Bounding => 1.0 / i as f64,
        }
    }

    /// Mean degree predicted for a typical trader, (κ + 2ℓ − 1) + E(μ).
    pub fn predicted_mean_degree(&self) -> f64 {
        (self.kappa + 2 * self.ell) as f64 - 1.0 + expected_extra_degree(self)
    }
}

/// Σ_{i>m} sinh(ℓ/i)/i for the 1/i tail of the bounding choice.
///
/// Expanding sinh gives Σ_{odd r} ℓ^r/r! · Σ_{i>m} i^−(r+1), and each inner
/// sum is (m+½)^−r / r up to s·m^−(s+1)/24 with s = r + 1, below 1e−15
/// for m = 10⁵.
fn bounding_tail(ell: f64, m: u64) -> f64 {
    let x = m as f64 + 0.5;
    let mut total = 0.0;
    let mut coef = ell; // ℓ^r / r!
    let mut r = 1;
    while r < 60 {
        let term = coef * x.powi(-r) / r as f64;
        total += term;
        if term < 1e-18 {
            break;
        }
        coef *= ell * ell / ((r + 1) * (r + 2)) as f64;
        r += 2;
    }
    total
}

/// E(μ) = 2ℓ Σ_{i>1} ξᵢ sinh(ℓ/i).
pub fn expected_extra_degree(model: &DegreeModel) -> f64 {
    let ell = model.ell as f64;
    let term = |i: u64| model.xi(i) * (ell / i as f64).sinh();
    let sum = match (&model.xi, model.max_size) {
        (Xi::Table(t), _) => t.keys().map(|&i| term(i)).sum(),
        (Xi::Bounding, Some(l)) => (2..=l).map(term).sum(),
        (Xi::Bounding, None) => {
            let m = DIRECT_TERMS.max(model.ell);
            (2..=m).map(term).sum::<f64>() + bounding_tail(ell, m)
        }
    };
    2.0 * ell * sum
}

/// (κ + 2ℓ − 1) + 2ℓ·[(ℓ−1) + ℓ·ζ(2) + ℓ³·ζ(4)/5], from the bounding ξ and
/// sinh(x) ≤ x + x³/5 on (0, 1).
pub fn worst_case_degree_bound(kappa: u64, ell: u64) -> f64 {
    let l = ell as f64;
    (kappa + 2 * ell) as f64 - 1.0 + 2.0 * l * ((l - 1.0) + l * ZETA2 + l.powi(3) * ZETA4 / 5.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(ell: u64, pairs: &[(u64, f64)]) -> DegreeModel {
        DegreeModel { ell, kappa: 25, xi: Xi::Table(pairs.iter().copied().collect()), max_size: None }
    }

    #[test]
    fn extra_degree_examples() {
        assert_eq!(expected_extra_degree(&table(3, &[])), 0.0);
        assert_eq!(expected_extra_degree(&table(3, &[(2, 0.0), (5, 0.0)])), 0.0);
        let four_sinh_one = expected_extra_degree(&table(2, &[(2, 1.0)]));
        assert!((four_sinh_one - 4.700_804_774_575_7).abs() < 1e-12);
        let paper = expected_extra_degree(&DegreeModel::bounding(25, 3));
        assert!((paper - 17.314_963_980_789_7).abs() < 1e-9, "{paper}");
    }

    #[test]
    fn bound_examples() {
        assert!((worst_case_degree_bound(3, 1) - 7.722_797_427_2).abs() < 1e-9);
        assert!((worst_case_degree_bound(25, 3) - 106.676_085_975_509).abs() < 1e-9);
        let r = worst_case_degree_bound(25, 400) / worst_case_degree_bound(25, 200);
        assert!((r - 16.0).abs() < 0.05, "{r}");
    }

    #[test]
    fn bounding_choice_respects_the_bound() {
        for ell in 1..8 {
            let m = DegreeModel::bounding(25, ell);
            assert!(m.predicted_mean_degree() <= worst_case_degree_bound(25, ell));
            for i in 2..50 {
                assert!((0.0..=1.0).contains(&m.xi(i)));
            }
        }
    }

    #[test]
    fn truncated_sizes_lower_the_mean() {
        let full = DegreeModel::bounding(25, 3);
        let cut = DegreeModel { max_size: Some(20), ..full.clone() };
        assert!(expected_extra_degree(&cut) < expected_extra_degree(&full));
    }
}
