//! Cycle statistics of uniform random permutations.
//!
//! In an amalgam of ℓ independent uniform permutations of n points the
//! number of cycles of size i tends to a Poisson law with mean ℓ/i. If
//! each point is independently bad with probability α, cycles with i good
//! and j bad points have mean (1/k)·C(k,i)·(1−α)^i·α^j, k = i + j.
//!
//! The conditioning identity and the total-variation quantities used to
//! justify the Poisson limit are not computed here.

use std::collections::BTreeMap;

use lor_core::randomness::HashDraw;
use serde::{Deserialize, Serialize};

use crate::AnalyticsError;

fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, j| acc * (n - k + j) as f64 / j as f64)
}

/// λᵢ = ℓ/i.
pub fn expected_cycle_count(ell: u64, i: u64) -> f64 {
    assert!(ell >= 1 && i >= 1);
    ell as f64 / i as f64
}

/// λ_{i,j} = (1/k)·C(k,i)·(1−α)^i·α^j with k = i + j.
pub fn two_color_cycle_rate(k: u64, i: u64, j: u64, alpha: f64) -> Result<f64, AnalyticsError> {
    if k == 0 || i + j != k {
        return Err(AnalyticsError::BadColoring { k, i, j });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(AnalyticsError::InvalidInput(format!("alpha = {alpha}")));
    }
    Ok(binomial(k, i) * (1.0 - alpha).powi(i as i32) * alpha.powi(j as i32) / k as f64)
}

/// Cycle-size counts of a permutation: `counts[i]` cycles of size i.
pub fn cycle_counts(perm: &[usize]) -> Vec<u32> {
    let n = perm.len();
    let mut counts = vec![0u32; n + 1];
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        counts[len] += 1;
    }
    counts
}

/// Per-trial cycle counts summed over the ℓ permutations of each trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleCensus {
    pub n: usize,
    pub ell: usize,
    /// `counts[t][i]`: cycles of size i in trial t.
    pub counts: Vec<Vec<u32>>,
}

impl CycleCensus {
    pub fn trials(&self) -> usize {
        self.counts.len()
    }

    pub fn mean(&self, i: usize) -> f64 {
        let s: u64 = self.counts.iter().map(|c| c.get(i).copied().unwrap_or(0) as u64).sum();
        s as f64 / self.trials().max(1) as f64
    }

    /// Σ i·Cᵢ = n·ℓ in every trial.
    pub fn identity_holds(&self) -> bool {
        self.counts
            .iter()
            .all(|c| c.iter().enumerate().map(|(i, &x)| i * x as usize).sum::<usize>() == self.n * self.ell)
    }
}

fn uniform_permutation(n: usize, state: &mut HashDraw) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    state.shuffle(&mut p);
    p
}

/// Samples `trials` amalgams of ℓ uniform permutations of n points. Trial
/// t draws from its own fork of `state`, so trials are independent of the
/// order they run in.
pub fn sample_permutation_cycles(n: usize, ell: usize, trials: usize, state: &HashDraw) -> CycleCensus {
    assert!(n >= 1 && trials >= 1);
    let counts = (0..trials)
        .map(|t| {
            let mut s = state.fork(t as u64);
            let mut total = vec![0u32; n + 1];
            for _ in 0..ell {
                for (i, c) in cycle_counts(&uniform_permutation(n, &mut s)).into_iter().enumerate() {
                    total[i] += c;
                }
            }
            total
        })
        .collect();
    CycleCensus { n, ell, counts }
}

/// Counts of cycles with i good and j bad points, for i + j ≤ `max_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoColorCensus {
    pub n: usize,
    pub alpha: f64,
    pub max_k: usize,
    /// `counts[&(i, j)][t]`
    pub counts: BTreeMap<(usize, usize), Vec<u32>>,
}

impl TwoColorCensus {
    pub fn mean(&self, i: usize, j: usize) -> f64 {
        let v = &self.counts[&(i, j)];
        v.iter().map(|&x| x as f64).sum::<f64>() / v.len().max(1) as f64
    }

    pub fn trials(&self) -> usize {
        self.counts.values().next().map_or(0, Vec::len)
    }
}

/// Each trial colours every point bad with probability α and draws one
/// uniform permutation.
pub fn sample_two_color_cycles(n: usize, alpha: f64, max_k: usize, trials: usize, state: &HashDraw) -> TwoColorCensus {
    let mut counts: BTreeMap<(usize, usize), Vec<u32>> = BTreeMap::new();
    for k in 1..=max_k {
        for i in 0..=k {
            counts.insert((i, k - i), vec![0; trials]);
        }
    }
    for t in 0..trials {
        let mut s = state.fork(t as u64);
        let bad: Vec<bool> = (0..n).map(|_| s.bernoulli(alpha)).collect();
        let perm = uniform_permutation(n, &mut s);
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let (mut good, mut wrong) = (0, 0);
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                if bad[i] {
                    wrong += 1;
                } else {
                    good += 1;
                }
                i = perm[i];
            }
            if let Some(v) = counts.get_mut(&(good, wrong)) {
                v[t] += 1;
            }
        }
    }
    TwoColorCensus { n, alpha, max_k, counts }
}

/// Every permutation of 0..n in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("successor exists");
        p.swap(i, j);
        p[i + 1..].reverse();
    }
}

/// Number of permutations of n points with `counts[i]` cycles of size i:
/// n! / Π i^cᵢ cᵢ!.
pub fn cycle_type_class_size(counts: &[u32]) -> u64 {
    let n: u64 = counts.iter().enumerate().map(|(i, &c)| i as u64 * c as u64).sum();
    let mut size: u64 = (1..=n).product();
    for (i, &c) in counts.iter().enumerate().skip(1) {
        size /= (i as u64).pow(c) * (1..=c as u64).product::<u64>();
    }
    size
}

/// Distribution of cycle types over all permutations of n points.
pub fn cycle_type_census(n: usize) -> BTreeMap<Vec<u32>, u64> {
    let mut out = BTreeMap::new();
    for p in all_permutations(n) {
        *out.entry(cycle_counts(&p)).or_insert(0) += 1;
    }
    out
}
