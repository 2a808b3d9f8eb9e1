use admc_core::control::Method;
use admc_core::stats::TrialRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 24 simulated subjects, ADMC at about half the Classic level, with
/// independent per-trial noise. Switches follow the same shape.
pub fn synthetic_cohort(seed: u64) -> Vec<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for s in 0..24 {
        let base: f64 = rng.random_range(24.0..38.0);
        for method in Method::ALL {
            let (factor, switches) = if method == Method::Classic { (1.0, 19.5) } else { (0.53, 9.6) };
            for trial in 0..24 {
                let time_s = (base * factor * rng.random_range(0.7..1.3f64) * 100.0).round() / 100.0;
                let switches = (switches * rng.random_range(0.6..1.4f64)).round() as u32;
                out.push(TrialRecord {
                    subject: format!("s{:02}", s + 1),
                    method,
                    trial: 8 + trial,
                    time_s,
                    switches,
                    spawn: trial % 8,
                });
            }
        }
    }
    out
}
