//! Oracle pilots over every spawn position for each method, without jitter.
//! Prints mean switches and completion time per method and the ADMC/Classic ratios.

use admc_core::batch::{run_batch, BatchSpec};
use admc_core::control::Method;
use std::collections::BTreeMap;

fn main() {
    let mut spec = BatchSpec::new(Method::ALL.to_vec(), 7, 1);
    spec.jitter = 0.0;
    spec.reaction_ticks = 0;
    spec.training_repeats = 0;
    spec.measured_repeats = 1;
    let result = run_batch(&spec).expect("batch runs");

    let mut per_method: BTreeMap<Method, Vec<(usize, u32, f64)>> = BTreeMap::new();
    for r in result.records() {
        per_method.entry(r.method).or_default().push((r.spawn, r.switches, r.time_s));
    }
    let mean = |m: Method, f: &dyn Fn(&(usize, u32, f64)) -> f64| {
        let v = &per_method[&m];
        v.iter().map(f).sum::<f64>() / v.len() as f64
    };
    println!("{:<11} {:>9} {:>9}", "method", "switches", "time_s");
    for m in Method::ALL {
        println!("{:<11} {:>9.2} {:>9.2}", m, mean(m, &|t| t.1 as f64), mean(m, &|t| t.2));
    }
    for m in [Method::Continuous, Method::Threshold] {
        println!(
            "{m}/classic: switches {:.3}, time {:.3}",
            mean(m, &|t| t.1 as f64) / mean(Method::Classic, &|t| t.1 as f64),
            mean(m, &|t| t.2) / mean(Method::Classic, &|t| t.2)
        );
    }
    for (m, trials) in &per_method {
        let mut sorted = trials.clone();
        sorted.sort_by_key(|t| t.0);
        let line: Vec<String> = sorted.iter().map(|t| format!("{}:{}/{:.1}s", t.0, t.1, t.2)).collect();
        println!("{m:<11} {}", line.join(" "));
    }
    if !result.timeouts().is_empty() {
        println!("timeouts: {:?}", result.timeouts());
    }
}
