//! Closed forms of the protocol analysis and the sampling oracles that
//! check them: majority-vote failure, cycle statistics of random
//! permutations, trader degree, and expected penalties.

pub mod binomial;
pub mod cycles;
pub mod degree;
pub mod penalty;
pub mod stats;

use thiserror::Error;

pub use binomial::{bad_ring_probability, berry_esseen_envelope, exact_wrong_vote_prob, normal_cdf};
pub use cycles::{
    expected_cycle_count, sample_permutation_cycles, sample_two_color_cycles, two_color_cycle_rate, CycleCensus,
    TwoColorCensus,
};
pub use degree::{expected_extra_degree, worst_case_degree_bound, DegreeModel, Xi};
pub use penalty::{expected_penalty_bound, harmonic, SizeRegime};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("alpha = {0} leaves no variance")]
    DegenerateAlpha(f64),
    #[error("i + j must equal k (k = {k}, i = {i}, j = {j})")]
    BadColoring { k: u64, i: u64, j: u64 },
    #[error("{0}")]
    InvalidInput(String),
}
