//! Closed-form oracles, distributional tests, martingale residuals and
//! ensemble summaries.

mod ks;
mod martingale;
mod oracle;
mod summary;

use serde::{Deserialize, Serialize};

pub use ks::{
    kolmogorov_q, ks_p_value, ks_statistic, ks_two_sample, ks_vs_normal, KS_LEVEL, MIN_SAMPLES,
};
pub use martingale::{
    bonferroni_z, martingale_residual, residual_intervals, three_sigma_level, ResidualInterval,
};
pub use oracle::{
    conditional_variance_identity_check, empirical_max_exponential, max_bound, squared_sojourns,
    variance_oracle, variance_oracle_naive,
};
pub use summary::{ensemble_summary, CovarianceMatrix, EnsembleSummary, SummaryCell};

/// Outcome of a statistical check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub z_score: Option<f64>,
    /// Significance level for p-value tests, critical `|z|` otherwise.
    pub threshold: f64,
    pub pass: bool,
    pub seed: u64,
    pub sample_sizes: Vec<usize>,
}

impl TestVerdict {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Two-sample z statistic `(a - b) / sqrt(se_a^2 + se_b^2)`.
pub fn two_sample_z(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    let s = (se_a * se_a + se_b * se_b).sqrt();
    if s > 0.0 {
        (a - b) / s
    } else if a == b {
        0.0
    } else {
        f64::INFINITY
    }
}
