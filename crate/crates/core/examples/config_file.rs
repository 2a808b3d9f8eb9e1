//! The documented configuration file: print the defaults, then load a
//! partial override and show what changed.

use admc_core::config::SimConfig;

fn main() {
    let defaults = SimConfig::default();
    let text = defaults.to_toml_string();
    println!("{}", text.lines().take(12).collect::<Vec<_>>().join("\n"));
    println!("... ({} lines in total)\n", text.lines().count());

    let custom = SimConfig::from_toml_str("threshold_pct = 30.0\ntick_rate_hz = 100.0\n").unwrap();
    println!("threshold {} % -> {} %", defaults.threshold.threshold_pct, custom.threshold.threshold_pct);
    println!("dt {} s -> {} s", defaults.dt(), custom.dt());

    match SimConfig::from_toml_str("threshold = 30.0") {
        Err(e) => println!("unknown key rejected: {e}"),
        Ok(_) => unreachable!(),
    }
}
