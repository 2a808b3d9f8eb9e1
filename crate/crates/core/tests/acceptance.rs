//! One pass/fail line per acceptance criterion. Runs without the test harness
//! so the report reads top to bottom; exits nonzero if any criterion fails.

mod common;

use admc_core::batch::{run_batch, BatchSpec};
use admc_core::config::SimConfig;
use admc_core::control::{
    classic_map, threshold_tick, ControlConfig, ControllerState, InputSample, Method, CLASSIC_MODES,
};
use admc_core::motion::{cosine_dissimilarity, DofWeights, MotionVector7, SpeedLimits, Vec3};
use admc_core::session::{read_frames, replay, write_frame};
use admc_core::stats::{
    analyze, effect_size_r, friedman, iqr_outlier_filter, wilcoxon_signed_rank, write_csv, Metric,
    SubjectMeans, TrialRecord, OUTLIER_IQR_FACTOR,
};
use admc_core::suggest::{ModeId, SuggestionSet};
use admc_core::task::{make_schedule, TrialKind, SPAWN_POSITIONS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

type Check = Result<String, String>;
type Outputs = (Vec<u8>, Vec<(String, Vec<u8>)>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit_s: f64, started: Instant) -> Result<Duration, String> {
    let t = started.elapsed();
    if t.as_secs_f64() < limit_s {
        Ok(t)
    } else {
        Err(format!("took {:.2} s, limit {limit_s} s", t.as_secs_f64()))
    }
}

fn random_vector(rng: &mut ChaCha8Rng) -> MotionVector7 {
    let mut c = || rng.random_range(-1.0..1.0);
    MotionVector7::new(Vec3::new(c(), c(), c()), Vec3::new(c(), c(), c()), c())
}

/// Returns whether a single threshold tick fires feedback when the active
/// direction is `active` and the optimal suggestion is `optimal`.
fn fires(active: MotionVector7, optimal: MotionVector7, cfg: &ControlConfig) -> bool {
    let mut c = ControllerState::new(Method::Threshold);
    c.admc.active_direction = active;
    let mut s = SuggestionSet::empty(0);
    s.suggestions[ModeId::Optimal.slot()].direction = optimal;
    s.suggestions[ModeId::Optimal.slot()].applicable = true;
    let (_, _, events) = threshold_tick(&mut c, &s, &InputSample::forward(1.0), cfg);
    !events.is_empty()
}

fn threshold_semantics() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAD3C);
    let mut fired = 0;
    for _ in 0..10_000 {
        let w = DofWeights::new(rng.random_range(0.1..2.0), rng.random_range(0.1..2.0), rng.random_range(0.1..2.0))
            .map_err(|e| e.to_string())?;
        let cfg = ControlConfig { weights: w, ..ControlConfig::default() };
        let u = random_vector(&mut rng);
        let v = random_vector(&mut rng);

        let d = cosine_dissimilarity(&u, &v, &w).map_err(|e| e.to_string())?;
        let f = fires(u, v, &cfg);
        ensure!(f == (d > 20.0), "fired={f} at d={d}");
        fired += usize::from(f);

        // Weighted-orthonormal pair, then directions at 20 ± 1e-9 percent.
        let e1 = u * (1.0 / u.weighted_norm(&w));
        let r = v - e1 * v.weighted_dot(&e1, &w);
        let e2 = r * (1.0 / r.weighted_norm(&w));
        for (delta, expect) in [(1e-9, true), (-1e-9, false)] {
            let cos = 1.0 - (20.0 + delta) / 50.0;
            let b = e1 * cos + e2 * (1.0 - cos * cos).sqrt();
            ensure!(fires(e1, b, &cfg) == expect, "boundary 20{delta:+e} gave {}", !expect);
        }

        let k = rng.random_range(0.01..100.0);
        ensure!(cosine_dissimilarity(&u, &(u * k), &w) == Ok(0.0), "aligned not exactly 0");
        ensure!(cosine_dissimilarity(&u, &(u * -k), &w) == Ok(100.0), "opposite not exactly 100");
    }
    let t = within(5.0, started)?;
    Ok(format!("10000 pairs, {fired} above 20%, boundary and endpoints exact, {:.2} s", t.as_secs_f64()))
}

fn oracle_batch() -> Result<Vec<TrialRecord>, String> {
    let mut spec = BatchSpec::new(Method::ALL.to_vec(), 0, 1);
    spec.jitter = 0.0;
    spec.reaction_ticks = 0;
    spec.training_repeats = 0;
    spec.measured_repeats = 1;
    let result = run_batch(&spec).map_err(|e| e.to_string())?;
    ensure!(result.timeouts().is_empty(), "timeouts: {:?}", result.timeouts());
    Ok(result.records())
}

fn by_spawn(records: &[TrialRecord], method: Method) -> Vec<&TrialRecord> {
    let mut v: Vec<&TrialRecord> = records.iter().filter(|r| r.method == method).collect();
    v.sort_by_key(|r| r.spawn);
    v
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0.0), |(s, n), v| (s + v, n + 1.0));
    sum / n
}

fn switch_pattern(records: &[TrialRecord], elapsed: Duration) -> Check {
    ensure!(elapsed.as_secs_f64() < 30.0, "batch took {:.2} s, limit 30 s", elapsed.as_secs_f64());
    let classic = by_spawn(records, Method::Classic);
    ensure!(classic.len() == SPAWN_POSITIONS, "classic ran {} trials", classic.len());
    let classic_mean = mean(classic.iter().map(|r| f64::from(r.switches)));
    let mut ratios = Vec::new();
    for method in [Method::Continuous, Method::Threshold] {
        let admc = by_spawn(records, method);
        ensure!(admc.len() == SPAWN_POSITIONS, "{method} ran {} trials", admc.len());
        for (a, c) in admc.iter().zip(&classic) {
            ensure!(a.switches < c.switches, "spawn {}: {method} {} vs classic {}", a.spawn, a.switches, c.switches);
        }
        let ratio = mean(admc.iter().map(|r| f64::from(r.switches))) / classic_mean;
        ensure!((0.3..=0.7).contains(&ratio), "{method}/classic switch ratio {ratio:.3}");
        ratios.push(format!("{method} {ratio:.3}"));
    }
    Ok(format!("ADMC below Classic on all 8 spawns; ratios {}; {:.2} s", ratios.join(", "), elapsed.as_secs_f64()))
}

fn time_pattern(records: &[TrialRecord]) -> Check {
    let classic = mean(by_spawn(records, Method::Classic).iter().map(|r| r.time_s));
    let mut ratios = Vec::new();
    for method in [Method::Continuous, Method::Threshold] {
        let ratio = mean(by_spawn(records, method).iter().map(|r| r.time_s)) / classic;
        ensure!(ratio <= 0.7, "{method}/classic time ratio {ratio:.3}");
        ratios.push(format!("{method} {ratio:.3}"));
    }
    Ok(format!("time ratios {} (classic mean {classic:.2} s)", ratios.join(", ")))
}

fn trial_protocol() -> Check {
    let started = Instant::now();
    for seed in 0..1000u64 {
        let schedule = make_schedule(seed);
        ensure!(schedule.len() == 32, "seed {seed}: {} trials", schedule.len());
        for (i, t) in schedule.iter().enumerate() {
            let expected = if i < 8 { TrialKind::Training } else { TrialKind::Measured };
            ensure!(t.index == i && t.kind == expected, "seed {seed}: trial {i} is {:?}", t);
        }
        for k in 0..SPAWN_POSITIONS {
            let count = |kind| schedule.iter().filter(|t| t.spawn == k && t.kind == kind).count();
            ensure!(count(TrialKind::Training) == 1, "seed {seed}: spawn {k} training count");
            ensure!(count(TrialKind::Measured) == 3, "seed {seed}: spawn {k} measured count");
        }
    }
    let t = within(2.0, started)?;
    Ok(format!("1000 schedules, zero violations, {:.3} s", t.as_secs_f64()))
}

fn statistics_pipeline() -> Check {
    let records = common::synthetic_cohort(17);
    let mut parts = Vec::new();
    for metric in [Metric::Time, Metric::Switches] {
        let report = analyze(&records, metric).map_err(|e| e.to_string())?;
        ensure!(report.friedman.p_value < 0.01, "{metric}: friedman p {}", report.friedman.p_value);
        for adaptive in [Method::Continuous, Method::Threshold] {
            let p = report.pair(Method::Classic, adaptive).and_then(|p| p.p_adjusted).unwrap_or(1.0);
            ensure!(p < 0.05, "{metric}: classic vs {adaptive} p_bonf {p}");
        }
        let p = report.pair(Method::Continuous, Method::Threshold).and_then(|p| p.p_adjusted).unwrap_or(0.0);
        ensure!(p >= 0.05, "{metric}: continuous vs threshold p_bonf {p}");
        parts.push(format!("{metric} friedman p={:.1e}", report.friedman.p_value));
    }

    let f = friedman(&vec![vec![1.0, 2.0, 3.0]; 3]).map_err(|e| e.to_string())?;
    ensure!((f.statistic - 6.0).abs() < 1e-9 && (f.p_value - (-3.0f64).exp()).abs() < 1e-9, "friedman fixture {f:?}");
    let x: Vec<f64> = (1..=10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| v + 5.0).collect();
    let w = wilcoxon_signed_rank(&x, &y).map_err(|e| e.to_string())?;
    ensure!((w.statistic - 27.0 / 75.625f64.sqrt()).abs() < 1e-9, "wilcoxon fixture {w:?}");
    let r = effect_size_r(4.11, 44);
    ensure!((r - 0.62).abs() <= 0.01, "r = {r}");
    Ok(format!("{}; fixtures to 1e-9; r(4.11, 44) = {r:.3}", parts.join(", ")))
}

fn outlier_rule() -> Check {
    let build = |rows: Vec<[f64; 3]>| SubjectMeans {
        subjects: (1..=rows.len()).map(|i| format!("s{i:02}")).collect(),
        methods: Method::ALL.to_vec(),
        values: rows.into_iter().map(|r| r.to_vec()).collect(),
    };
    let mut rows: Vec<[f64; 3]> = (0..12).map(|i| [30.0 + i as f64, 15.0 + (i % 4) as f64, 14.0 + i as f64]).collect();
    rows[5][2] = 60.0;
    let split = iqr_outlier_filter(&build(rows), OUTLIER_IQR_FACTOR).map_err(|e| e.to_string())?;
    ensure!(split.excluded == ["s06"], "excluded {:?}", split.excluded);
    ensure!(split.kept.subjects.len() == 11 && split.kept.values.iter().all(|r| r.len() == 3), "s06 not removed from every method");
    let flat = iqr_outlier_filter(&build(vec![[7.0; 3]; 10]), OUTLIER_IQR_FACTOR).map_err(|e| e.to_string())?;
    ensure!(flat.excluded.is_empty(), "all-equal excluded {:?}", flat.excluded);
    Ok("one subject excluded from all methods; all-equal keeps everyone".into())
}

fn determinism() -> Check {
    let run = || -> Result<Outputs, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut spec = BatchSpec::new(Method::ALL.to_vec(), 7, 2);
        spec.training_repeats = 0;
        spec.measured_repeats = 1;
        spec.frames_dir = Some(dir.path().to_path_buf());
        let result = run_batch(&spec).map_err(|e| e.to_string())?;
        let mut csv = Vec::new();
        write_csv(&mut csv, &result.records()).map_err(|e| e.to_string())?;
        let mut logs = Vec::new();
        for entry in std::fs::read_dir(dir.path()).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            logs.push((name, std::fs::read(&path).map_err(|e| e.to_string())?));
        }
        logs.sort();
        Ok((csv, logs))
    };
    let (csv_a, logs_a) = run()?;
    let (csv_b, logs_b) = run()?;
    ensure!(csv_a == csv_b, "CSV differs between runs");
    ensure!(logs_a.len() == 6, "expected 6 frame logs, got {}", logs_a.len());
    ensure!(logs_a == logs_b, "JSONL differs between runs");

    let mut replayed_frames = 0;
    for (name, bytes) in &logs_a {
        let frames = read_frames(&bytes[..]).map_err(|e| e.to_string())?;
        let again = replay(&frames, &SimConfig::default()).map_err(|e| format!("{name}: {e}"))?;
        let mut out = Vec::new();
        for f in &again {
            write_frame(&mut out, f).map_err(|e| e.to_string())?;
        }
        ensure!(&out == bytes, "{name}: replay differs");
        replayed_frames += again.len();
    }
    Ok(format!("CSV and 6 JSONL logs bit-identical; {replayed_frames} frames replayed bit-exactly"))
}

fn classic_coverage() -> Check {
    // DoF index: 0..3 translation, 3..6 rotation, 6 finger.
    let limits = SpeedLimits::default();
    let mut owner: [Vec<(u8, u8)>; 7] = Default::default();
    let mut dead = Vec::new();
    for mode in 1..=CLASSIC_MODES {
        let mut c = ControllerState::new(Method::Classic);
        c.classic_mode = mode;
        for (axis, input) in [(1u8, InputSample::new(1.0, 0.0, false)), (2, InputSample::new(0.0, 1.0, false))] {
            let a = classic_map(&c, &input, &limits).to_array();
            let moved: Vec<usize> = (0..7).filter(|&i| a[i] != 0.0).collect();
            match moved[..] {
                [] => dead.push((mode, axis)),
                [i] => owner[i].push((mode, axis)),
                _ => return Err(format!("mode {mode} axis {axis} moves DoFs {moved:?}")),
            }
        }
    }
    for (dof, pairs) in owner.iter().enumerate() {
        ensure!(pairs.len() == 1, "DoF {dof} reachable via {pairs:?}");
    }
    ensure!(dead == [(4, 2)], "unmapped pairs {dead:?}");
    Ok("7 DoFs each reachable through exactly one (mode, axis); mode 4 axis 2 unmapped".into())
}

fn run(name: &str, check: impl FnOnce() -> Check) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("[PASS] {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("[FAIL] {name}: {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= run("threshold semantics", threshold_semantics);

    let started = Instant::now();
    let batch = oracle_batch();
    let elapsed = started.elapsed();
    ok &= run("mode-switch pattern", || switch_pattern(batch.as_ref().map_err(Clone::clone)?, elapsed));
    ok &= run("completion-time pattern", || time_pattern(batch.as_ref().map_err(Clone::clone)?));

    ok &= run("trial protocol", trial_protocol);
    ok &= run("statistics pipeline", statistics_pipeline);
    ok &= run("outlier rule", outlier_rule);
    ok &= run("determinism and replay", determinism);
    ok &= run("classic coverage", classic_coverage);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
