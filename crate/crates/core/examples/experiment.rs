//! Runs all three conditions on a synthetic dataset.
//!
//! Usage: `cargo run --release -p fuseid-core --example experiment -- [voice_noise] [face_noise] [seed]`

use std::time::Instant;

use fuseid_core::pipeline::{run_experiment, ExperimentConfig};
use fuseid_core::store::{generate_synthetic, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let defaults = SynthConfig::default();
    let synth = SynthConfig {
        voice_noise_sigma: args
            .first()
            .map_or(Ok(defaults.voice_noise_sigma), |a| a.parse())?,
        face_noise_sigma: args
            .get(1)
            .map_or(Ok(defaults.face_noise_sigma), |a| a.parse())?,
        seed: args.get(2).map_or(Ok(defaults.seed), |a| a.parse())?,
        ..defaults
    };
    let records = generate_synthetic(&synth)?;
    let start = Instant::now();
    let out = run_experiment(&records, &ExperimentConfig::default())?;
    let loss = &out.loss_history;
    if let (Some(first), Some(last)) = (loss.first(), loss.last()) {
        println!("loss {first:.4} -> {last:.4} over {} epochs", loss.len());
    }
    print!("{}", out.comparison.to_text());
    println!("{:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
