//! Simulates the desk database and trains the with-RIS model on it, printing
//! one line per validation pass. `--quick` swaps in a tiny model and ten
//! samples per case: a one-minute smoke run that does not learn to count well.
//!
//!     cargo run --release --example train_desk -- [OUT_DIR] [--quick]

use std::path::PathBuf;
use std::time::Instant;

use ris_fingerprint::dataset::SplitCounts;
use ris_fingerprint::model::Profile;
use ris_fingerprint::pipeline::{codebook_stage, preprocess_stage, simulate_stage, train_stage, RunConfig, Variant};

fn main() -> ris_fingerprint::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let quick = args.iter().any(|a| a == "--quick");
    let out = PathBuf::from(args.iter().find(|a| !a.starts_with("--")).map_or("target/example-desk", |s| s));

    let mut cfg = RunConfig::desk(0);
    if quick {
        cfg.dataset.samples_per_case = 10;
        cfg.dataset.split = SplitCounts::new(6, 2, 2);
        cfg.model.profile = Profile::Tiny;
        cfg.training.max_epochs = 15;
        cfg.training.learning_rate = 3e-3;
    }
    let start = Instant::now();
    codebook_stage(&cfg, &out)?;
    cfg.save(&out.join("config.json"))?;
    let db = simulate_stage(&cfg, &out, Variant::WithRis)?;
    let features = preprocess_stage(&out, Variant::WithRis)?;
    println!(
        "{} records, {} feature sequences of length {}",
        db.records.len(),
        features.len(),
        features[0].features.len()
    );
    println!("step   train_loss  val_loss  val_count_acc  elapsed");
    let (params, log) = train_stage(&cfg, &out, Variant::WithRis, |row| {
        println!(
            "{:>5}  {:>10.4}  {:>8.4}  {:>13.3}  {:>6.0}s",
            row.step,
            row.train_loss,
            row.val_loss,
            row.val_count_acc,
            start.elapsed().as_secs_f64()
        );
    })?;
    println!(
        "{} parameters, stopped after {} rows; checkpoint in {}",
        params.count(),
        log.rows.len(),
        Variant::WithRis.dir(&out).display()
    );
    Ok(())
}
