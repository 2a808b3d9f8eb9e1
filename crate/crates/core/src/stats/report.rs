use super::{
    aggregate, bonferroni, friedman, iqr_outlier_filter, wilcoxon_signed_rank, EffectMagnitude, Metric,
    StatsError, TestResult, TrialRecord, OUTLIER_IQR_FACTOR,
};
use crate::control::Method;
use serde::Serialize;
use std::fmt::Write;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Descriptive {
    pub method: Method,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairwiseResult {
    pub a: Method,
    pub b: Method,
    /// `None` when there were too few non-zero differences to test.
    pub test: Option<TestResult>,
    pub p_adjusted: Option<f64>,
    pub effect: Option<EffectMagnitude>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub metric: Metric,
    pub subjects_total: usize,
    pub excluded: Vec<String>,
    pub descriptives: Vec<Descriptive>,
    pub friedman: TestResult,
    pub pairwise: Vec<PairwiseResult>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Full pipeline for one metric.
pub fn analyze(records: &[TrialRecord], metric: Metric) -> Result<AnalysisReport, StatsError> {
    let means = aggregate(records, metric)?;
    if means.methods.len() < 2 {
        return Err(StatsError::TooFew { what: "methods", need: 2, got: means.methods.len() });
    }
    let split = iqr_outlier_filter(&means, OUTLIER_IQR_FACTOR)?;
    let kept = &split.kept;

    let descriptives = kept
        .methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let (mean, sd) = mean_sd(&kept.column(i));
            Descriptive { method, mean, sd }
        })
        .collect();

    let mut omnibus = friedman(&kept.values)?;
    omnibus.excluded = split.excluded.clone();

    let k = kept.methods.len();
    let comparisons = k * (k - 1) / 2;
    let mut pairwise = Vec::with_capacity(comparisons);
    for i in 0..k {
        for j in (i + 1)..k {
            let test = match wilcoxon_signed_rank(&kept.column(i), &kept.column(j)) {
                Ok(t) => Some(t),
                Err(StatsError::TooFew { .. }) => None,
                Err(e) => return Err(e),
            };
            pairwise.push(PairwiseResult {
                a: kept.methods[i],
                b: kept.methods[j],
                p_adjusted: test.as_ref().map(|t| bonferroni(t.p_value, comparisons)),
                effect: test.as_ref().and_then(|t| t.effect_size).map(EffectMagnitude::classify),
                test,
            });
        }
    }

    Ok(AnalysisReport {
        metric,
        subjects_total: means.subjects.len(),
        excluded: split.excluded,
        descriptives,
        friedman: omnibus,
        pairwise,
    })
}

impl AnalysisReport {
    pub fn subjects_kept(&self) -> usize {
        self.subjects_total - self.excluded.len()
    }

    pub fn pair(&self, a: Method, b: Method) -> Option<&PairwiseResult> {
        self.pairwise
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "metric: {}", self.metric);
        let _ = writeln!(
            s,
            "subjects: {} ({} excluded by the {}×IQR rule{})",
            self.subjects_kept(),
            self.excluded.len(),
            OUTLIER_IQR_FACTOR,
            if self.excluded.is_empty() {
                String::new()
            } else {
                format!(": {}", self.excluded.join(", "))
            }
        );
        for d in &self.descriptives {
            let _ = writeln!(s, "  {:<11} mean = {:.3}  sd = {:.3}", d.method, d.mean, d.sd);
        }
        let f = &self.friedman;
        let _ = writeln!(
            s,
            "friedman: chi2({}) = {:.3}, p = {:.4}, N = {}",
            f.df.unwrap_or(0.0),
            f.statistic,
            f.p_value,
            f.n
        );
        for p in &self.pairwise {
            match &p.test {
                Some(t) => {
                    let _ = writeln!(
                        s,
                        "wilcoxon {} vs {}: Z = {:.3}, p = {:.4}, p_bonferroni = {:.4}, r = {:.3} ({})",
                        p.a,
                        p.b,
                        t.statistic,
                        t.p_value,
                        p.p_adjusted.unwrap_or(1.0),
                        t.effect_size.unwrap_or(0.0),
                        p.effect.map_or("n/a", EffectMagnitude::as_str)
                    );
                }
                None => {
                    let _ = writeln!(s, "wilcoxon {} vs {}: too few non-zero differences", p.a, p.b);
                }
            }
        }
        s
    }

    /// One `key=value` per line.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "metric={}", self.metric);
        let _ = writeln!(s, "subjects_total={}", self.subjects_total);
        let _ = writeln!(s, "subjects_kept={}", self.subjects_kept());
        let _ = writeln!(s, "excluded={}", self.excluded.join(";"));
        for d in &self.descriptives {
            let _ = writeln!(s, "mean.{}={}", d.method, d.mean);
            let _ = writeln!(s, "sd.{}={}", d.method, d.sd);
        }
        let f = &self.friedman;
        let _ = writeln!(s, "friedman.chi2={}", f.statistic);
        let _ = writeln!(s, "friedman.df={}", f.df.unwrap_or(0.0));
        let _ = writeln!(s, "friedman.p={}", f.p_value);
        let _ = writeln!(s, "friedman.n={}", f.n);
        for p in &self.pairwise {
            let key = format!("wilcoxon.{}_vs_{}", p.a, p.b);
            match &p.test {
                Some(t) => {
                    let _ = writeln!(s, "{key}.z={}", t.statistic);
                    let _ = writeln!(s, "{key}.p={}", t.p_value);
                    let _ = writeln!(s, "{key}.p_bonferroni={}", p.p_adjusted.unwrap_or(1.0));
                    let _ = writeln!(s, "{key}.n={}", t.n);
                    let _ = writeln!(s, "{key}.r={}", t.effect_size.unwrap_or(0.0));
                    let _ = writeln!(s, "{key}.effect={}", p.effect.map_or("n/a", EffectMagnitude::as_str));
                }
                None => {
                    let _ = writeln!(s, "{key}.status=insufficient_data");
                }
            }
        }
        s
    }
}
