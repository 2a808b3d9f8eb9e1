//! Analysis pipeline for trial logs: per-subject aggregation, 2.2×IQR outlier
//! exclusion, Friedman omnibus test, pairwise Wilcoxon signed-rank tests with
//! Bonferroni correction, and `r` effect sizes.

mod friedman;
mod outlier;
mod records;
mod report;
mod wilcoxon;

pub use friedman::{friedman, friedman_exact_p, rank_average};
pub use outlier::{iqr, iqr_outlier_filter, quantile, OutlierSplit, OUTLIER_IQR_FACTOR};
pub use records::{aggregate, read_csv, write_csv, Metric, SubjectMeans, TrialRecord};
pub use report::{analyze, AnalysisReport, Descriptive, PairwiseResult};
pub use wilcoxon::{bonferroni, effect_size_r, wilcoxon_signed_rank, EffectMagnitude};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no records")]
    Empty,
    #[error("unbalanced design: subject `{subject}` has no records for {method}")]
    Unbalanced { subject: String, method: String },
    #[error("need at least {need} {what}, got {got}")]
    TooFew { what: &'static str, need: usize, got: usize },
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Outcome of a hypothesis test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// χ² for Friedman, Z for Wilcoxon.
    pub statistic: f64,
    pub p_value: f64,
    /// Subjects (Friedman) or non-zero pairs (Wilcoxon).
    pub n: usize,
    pub df: Option<f64>,
    /// Effect size `r`, where applicable.
    pub effect_size: Option<f64>,
    pub excluded: Vec<String>,
}
