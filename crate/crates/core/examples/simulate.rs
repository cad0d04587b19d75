//! Runs an experiment config and prints the summary table.
//!
//! cargo run --release --example simulate -- [CONFIG] [REPLICATES]
//!
//! CONFIG defaults to examples/data/experiment_grid4x4_normal.json.

use hierface::facial::FacialOptions;
use hierface::model::Model;
use hierface::sim::{run_experiment, ExperimentConfig, ModelRef};

fn main() -> hierface::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let mut args = std::env::args().skip(1);
    let path = args.next().map(Into::into).unwrap_or_else(|| dir.join("experiment_grid4x4_normal.json"));
    let mut cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    cfg.replicates = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    cfg.sample_sizes.truncate(1);
    let model = match &cfg.model {
        ModelRef::Inline(spec) => spec.build()?,
        ModelRef::Path(p) => Model::load(&path.parent().unwrap_or(&dir).join(p))?,
    };
    let out = run_experiment(&cfg, &model, &FacialOptions::default())?;
    print!("{}", out.csv_string()?);
    for r in out.replicates.iter().filter(|r| r.error.is_some()) {
        eprintln!("replicate {} failed: {}", r.replicate, r.error.as_deref().unwrap_or(""));
    }
    Ok(())
}
