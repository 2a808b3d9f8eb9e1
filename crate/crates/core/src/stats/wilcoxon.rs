use super::friedman::{rank_average, tie_sum};
use super::{StatsError, TestResult};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Minimum number of non-zero differences for the normal approximation.
pub const MIN_PAIRS: usize = 5;

/// Wilcoxon signed-rank test on `d = y − x`, normal approximation with tie and
/// continuity correction, two-tailed.
///
/// Zero differences are dropped. `Z` is positive when `y` tends to exceed
/// `x`, so swapping the samples negates it. The effect size is
/// `r = |Z| / √(2n)`, counting both observations of each of the `n` pairs.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidValue("non-finite sample".into()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - a).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n: 0,
            df: None,
            effect_size: Some(0.0),
            excluded: Vec::new(),
        });
    }
    if n < MIN_PAIRS {
        return Err(StatsError::TooFew { what: "non-zero differences", need: MIN_PAIRS, got: n });
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = rank_average(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_sum(&abs) / 48.0;
    let diff = w_plus - mean;
    let z = if var <= 0.0 {
        0.0
    } else {
        diff.signum() * (diff.abs() - 0.5).max(0.0) / var.sqrt()
    };
    let p = if z == 0.0 {
        1.0
    } else {
        (2.0 * Normal::standard().sf(z.abs())).min(1.0)
    };
    Ok(TestResult {
        statistic: z,
        p_value: p,
        n,
        df: None,
        effect_size: Some(effect_size_r(z, 2 * n)),
        excluded: Vec::new(),
    })
}

/// `r = |Z| / √N` with `N` the number of observations.
pub fn effect_size_r(z: f64, observations: usize) -> f64 {
    if observations == 0 {
        0.0
    } else {
        (z.abs() / (observations as f64).sqrt()).min(1.0)
    }
}

pub fn bonferroni(p: f64, comparisons: usize) -> f64 {
    (p * comparisons.max(1) as f64).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectMagnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectMagnitude {
    /// `r > 0.1` small, `> 0.3` medium, `> 0.5` large.
    pub fn classify(r: f64) -> Self {
        if r > 0.5 {
            EffectMagnitude::Large
        } else if r > 0.3 {
            EffectMagnitude::Medium
        } else if r > 0.1 {
            EffectMagnitude::Small
        } else {
            EffectMagnitude::Negligible
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EffectMagnitude::Negligible => "negligible",
            EffectMagnitude::Small => "small",
            EffectMagnitude::Medium => "medium",
            EffectMagnitude::Large => "large",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_samples_are_degenerate() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let r = wilcoxon_signed_rank(&x, &x).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    /// d = +5 for all ten pairs: one tie group of ten, ranks all 5.5, W+ = 55.
    /// μ = 27.5, σ² = 96.25 − 990/48 = 75.625, Z = 27 / √75.625.
    #[test]
    fn constant_shift_hand_computed() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 5.0).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        let z = 27.0 / 75.625f64.sqrt();
        assert_abs_diff_eq!(r.statistic, z, epsilon = 1e-12);
        assert_eq!(r.n, 10);
        let swapped = wilcoxon_signed_rank(&y, &x).unwrap();
        assert_eq!(swapped.statistic, -r.statistic);
        assert_eq!(swapped.p_value, r.p_value);
    }

    #[test]
    fn too_few_pairs() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 2.0, 3.5, 4.5, 5.5];
        assert!(matches!(wilcoxon_signed_rank(&x, &y), Err(StatsError::TooFew { .. })));
        assert!(matches!(wilcoxon_signed_rank(&x, &y[..4]), Err(StatsError::LengthMismatch(5, 4))));
    }

    #[test]
    fn bonferroni_examples() {
        assert_abs_diff_eq!(bonferroni(0.02, 3), 0.06, epsilon = 1e-15);
        assert_eq!(bonferroni(0.5, 3), 1.0);
        assert_abs_diff_eq!(bonferroni(0.333, 3), 0.999, epsilon = 1e-15);
    }

    #[test]
    fn effect_size_scale() {
        assert_abs_diff_eq!(effect_size_r(-4.11, 44), 0.6196, epsilon = 1e-4);
        assert_eq!(EffectMagnitude::classify(0.62), EffectMagnitude::Large);
        assert_eq!(EffectMagnitude::classify(0.31), EffectMagnitude::Medium);
        assert_eq!(EffectMagnitude::classify(0.28), EffectMagnitude::Small);
        assert_eq!(EffectMagnitude::classify(0.1), EffectMagnitude::Negligible);
    }
}
