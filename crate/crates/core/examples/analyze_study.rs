//! Simulate a small cohort, write the trial CSV, read it back and run the
//! full analysis for both metrics.

use admc_core::batch::{run_batch, BatchSpec};
use admc_core::control::Method;
use admc_core::stats::{analyze, read_csv, write_csv, Metric};

fn main() {
    let spec = BatchSpec::new(Method::ALL.to_vec(), 42, 12);
    let result = run_batch(&spec).expect("batch runs");
    let mut csv = Vec::new();
    write_csv(&mut csv, &result.records()).unwrap();
    println!("{} measured trials, {} bytes of CSV", result.records().len(), csv.len());

    let records = read_csv(&csv[..]).unwrap();
    for metric in [Metric::Time, Metric::Switches] {
        println!();
        print!("{}", analyze(&records, metric).unwrap().to_text());
    }
}
