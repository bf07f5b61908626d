//! Scores a trained checkpoint on the test split. Run `train_desk` with the
//! same directory first.
//!
//!     cargo run --release --example evaluate_model -- [OUT_DIR]

use std::path::PathBuf;

use ris_fingerprint::pipeline::{evaluate_stage, RunConfig, Variant};

fn main() -> ris_fingerprint::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-desk".into()));
    let cfg = RunConfig::load(&out.join("config.json"))?;
    let report = evaluate_stage(&cfg, &out, Variant::WithRis)?;

    let acc = &report.counting_accuracy;
    println!("counting accuracy {:.3} over {} samples", acc.overall, acc.samples);
    for (count, a) in &acc.per_count {
        println!("  {count} people: {a:.3}");
    }
    println!("exact set accuracy {:.3}", report.exact_set_accuracy);
    match report.median_error {
        Some(m) => println!(
            "median matched error {m:.3} m over {} people (grid spacing {:.2} m)",
            report.error_samples.len(),
            report.metadata.grid_spacing.unwrap_or(f64::NAN)
        ),
        None => println!("no correctly counted samples to localise"),
    }
    println!("confusion trace {} of {}", report.confusion.trace(), report.confusion.total());
    println!("report written to {}", Variant::WithRis.dir(&out).join("report").display());
    Ok(())
}
