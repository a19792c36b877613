//! Small summary statistics for oracle comparisons.

/// Mean and unbiased sample variance.
pub fn mean_var<I: IntoIterator<Item = f64>>(xs: I) -> (f64, f64, usize) {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for x in xs {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, var, n)
}

/// (observed − predicted) / standard error; `None` when the error is zero.
pub fn z_score(observed: f64, predicted: f64, std_err: f64) -> Option<f64> {
    if std_err > 0.0 && std_err.is_finite() {
        Some((observed - predicted) / std_err)
    } else {
        None
    }
}

/// Standard error of a binomial proportion with success probability `p`
/// over `n` trials.
pub fn binomial_std_err(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n.max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 4.0, 9.0];
        let (m, v, n) = mean_var(xs);
        assert_eq!(n, 4);
        assert!((m - 4.5).abs() < 1e-15);
        assert!((v - 11.0).abs() < 1e-12);
        assert_eq!(z_score(1.0, 1.0, 0.0), None);
        assert_eq!(z_score(3.0, 1.0, 1.0), Some(2.0));
    }
}
