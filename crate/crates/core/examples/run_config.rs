//! Runs an experiment config and prints every stage summary.
//!
//! `cargo run --example run_config -- crates/core/configs/two_blocks.json`

use std::path::PathBuf;

use degenflow::experiment::{run_experiment, ExperimentConfig};

fn main() -> degenflow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/two_blocks.json"));
    let mut cfg = ExperimentConfig::from_path(&path)?;
    cfg.output_dir = std::env::temp_dir().join("degenflow-example");
    let report = run_experiment(&cfg)?;
    for (stage, summary) in &report.summaries {
        println!("{stage}: {summary}");
    }
    println!("{} artifacts in {}", report.manifest.artifacts.len(), report.output_dir.display());
    Ok(())
}
