use super::{StatsError, SubjectMeans};

pub const OUTLIER_IQR_FACTOR: f64 = 2.2;

/// Quantile by linear interpolation between closest ranks on sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.75) - quantile(&v, 0.25)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutlierSplit {
    pub kept: SubjectMeans,
    pub excluded: Vec<String>,
}

/// Excludes a subject from every method when, in at least one method, its
/// mean lies `k × IQR` or further from that method's cohort mean.
///
/// With a zero IQR, every subject that differs from the median is excluded.
pub fn iqr_outlier_filter(means: &SubjectMeans, k: f64) -> Result<OutlierSplit, StatsError> {
    let n = means.subjects.len();
    if n < 4 {
        return Err(StatsError::TooFew { what: "subjects", need: 4, got: n });
    }
    let mut excluded = vec![false; n];
    for m in 0..means.methods.len() {
        let col = means.column(m);
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        let spread = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
        if spread == 0.0 {
            let median = quantile(&sorted, 0.5);
            for (i, v) in col.iter().enumerate() {
                excluded[i] |= *v != median;
            }
        } else {
            let mean = col.iter().sum::<f64>() / n as f64;
            for (i, v) in col.iter().enumerate() {
                excluded[i] |= (v - mean).abs() >= k * spread;
            }
        }
    }
    Ok(OutlierSplit {
        kept: means.retain_subjects(|i| !excluded[i]),
        excluded: (0..n)
            .filter(|&i| excluded[i])
            .map(|i| means.subjects[i].clone())
            .collect(),
    })
}
