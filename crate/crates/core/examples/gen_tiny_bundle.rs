//! Writes a seeded random tiny model (config + weight bundle) and a
//! synthetic QA corpus, so the CLI can be exercised without a real
//! checkpoint.
//!
//! Usage: cargo run -p halo-core --example gen_tiny_bundle -- <dir> [seed]

use halo_core::model::save_model;
use halo_core::synth;

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = std::path::PathBuf::from(args.next().unwrap_or_else(|| "tiny".to_string()));
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(1);

    std::fs::create_dir_all(&dir).expect("create output dir");
    let config = synth::tiny_config();
    let weights = synth::random_weights(&config, seed);
    save_model(
        &dir.join("model.json"),
        &dir.join("model.bin"),
        &config,
        &weights,
    )
    .expect("write model");

    let samples = synth::synthetic_samples(50, seed.wrapping_add(0xC0FFEE));
    let mut jsonl = String::new();
    for sample in &samples {
        jsonl.push_str(&serde_json::to_string(sample).expect("sample json"));
        jsonl.push('\n');
    }
    std::fs::write(dir.join("samples.jsonl"), jsonl).expect("write corpus");

    println!(
        "wrote model.json, model.bin, samples.jsonl ({} samples) to {}",
        samples.len(),
        dir.display()
    );
}
