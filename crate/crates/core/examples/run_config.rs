//! Runs a config file through the library API and prints the CSV.
//!
//! `cargo run --example run_config -- configs/acceptance/c08_loop_area.cfg`

use nab2lab::config::parse_config;
use nab2lab::experiment::{run_experiment, to_csv};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/acceptance/c02_constant_area.cfg".into());
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let spec = parse_config(&text).unwrap_or_else(|e| panic!("{path}: {e}"));
    let records = run_experiment(&spec, None).expect("valid experiment");
    print!("{}", to_csv(spec.kind, &records));
}
