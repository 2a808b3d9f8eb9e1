use super::{StatsError, TestResult};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::HashMap;

/// 1-based ranks, ties sharing the average of the ranks they span.
pub fn rank_average(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Σ (t³ − t) over groups of tied values.
pub(crate) fn tie_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

fn check_matrix(matrix: &[Vec<f64>]) -> Result<(usize, usize), StatsError> {
    let n = matrix.len();
    if n < 2 {
        return Err(StatsError::TooFew { what: "subjects", need: 2, got: n });
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(StatsError::TooFew { what: "methods", need: 2, got: k });
    }
    for row in matrix {
        if row.len() != k {
            return Err(StatsError::LengthMismatch(row.len(), k));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::InvalidValue("non-finite value in matrix".into()));
        }
    }
    Ok((n, k))
}

/// χ² from column rank sums, with the tie correction.
fn chi_square(rank_sums: &[f64], n: usize, k: usize, ties: f64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    let ss: f64 = rank_sums.iter().map(|r| r * r).sum();
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * ss - 3.0 * nf * (kf + 1.0);
    let denom = 1.0 - ties / (nf * (kf * kf * kf - kf));
    if denom <= 0.0 {
        0.0
    } else {
        (raw / denom).max(0.0)
    }
}

/// Friedman test over a subjects × methods matrix; p from the χ²(k − 1) tail.
pub fn friedman(matrix: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    let (n, k) = check_matrix(matrix)?;
    let mut sums = vec![0.0; k];
    let mut ties = 0.0;
    for row in matrix {
        for (s, r) in sums.iter_mut().zip(rank_average(row)) {
            *s += r;
        }
        ties += tie_sum(row);
    }
    let stat = chi_square(&sums, n, k, ties);
    let df = (k - 1) as f64;
    let p = if stat == 0.0 {
        1.0
    } else {
        ChiSquared::new(df).expect("df > 0").sf(stat).clamp(0.0, 1.0)
    };
    Ok(TestResult {
        statistic: stat,
        p_value: p,
        n,
        df: Some(df),
        effect_size: None,
        excluded: Vec::new(),
    })
}

fn permutations(ranks: &[i64]) -> Vec<Vec<i64>> {
    if ranks.len() <= 1 {
        return vec![ranks.to_vec()];
    }
    let mut out = Vec::new();
    let mut seen = Vec::new();
    for i in 0..ranks.len() {
        if seen.contains(&ranks[i]) {
            continue;
        }
        seen.push(ranks[i]);
        let mut rest = ranks.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Exact permutation p-value of the Friedman statistic, for small designs
/// (at most 8 subjects and 5 methods). Each subject's ranks are permuted
/// independently; the distribution of column rank sums is built by dynamic
/// programming.
pub fn friedman_exact_p(matrix: &[Vec<f64>]) -> Result<f64, StatsError> {
    let (n, k) = check_matrix(matrix)?;
    if n > 8 || k > 5 {
        return Err(StatsError::InvalidValue("exact test limited to 8 subjects and 5 methods".into()));
    }
    let observed = friedman(matrix)?.statistic;
    let ties: f64 = matrix.iter().map(|r| tie_sum(r)).sum();

    // Doubled ranks keep averaged ties integral.
    let mut dist: HashMap<Vec<i64>, f64> = HashMap::from([(vec![0; k], 1.0)]);
    for row in matrix {
        let doubled: Vec<i64> = rank_average(row).iter().map(|r| (r * 2.0).round() as i64).collect();
        let perms = permutations(&doubled);
        let weight = 1.0 / perms.len() as f64;
        let mut next: HashMap<Vec<i64>, f64> = HashMap::new();
        for (sums, prob) in &dist {
            for p in &perms {
                let s: Vec<i64> = sums.iter().zip(p).map(|(a, b)| a + b).collect();
                *next.entry(s).or_insert(0.0) += prob * weight;
            }
        }
        dist = next;
    }
    let p: f64 = dist
        .iter()
        .filter(|(sums, _)| {
            let halves: Vec<f64> = sums.iter().map(|s| *s as f64 / 2.0).collect();
            chi_square(&halves, n, k, ties) >= observed - 1e-9
        })
        .map(|(_, prob)| prob)
        .sum();
    Ok(p.min(1.0))
}
