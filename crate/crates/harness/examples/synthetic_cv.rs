//! Cross-validate both classifiers on a generated cohort.
//!
//! `cargo run --release -p sagaze-harness --example synthetic_cv -- [seed]`

use std::time::Instant;

use sagaze_core::synth::{generate_cohort, SynthConfig};
use sagaze_harness::{run_experiment, ExperimentConfig};

fn main() {
    env_logger::init();
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let start = Instant::now();
    let trials = generate_cohort(&SynthConfig::default(), seed).expect("default synth config is valid");
    let out = run_experiment(&trials, &ExperimentConfig::default(), seed, None).expect("experiment runs");
    println!("{}", out.report.to_table());
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
}
