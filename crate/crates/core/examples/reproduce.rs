//! Full with-RIS against without-RIS comparison on the desk setup for one
//! seed. Takes several minutes per variant on one core.
//!
//!     cargo run --release --example reproduce -- [SEED] [OUT_DIR]

use std::path::PathBuf;
use std::time::Instant;

use ris_fingerprint::pipeline::{reproduce, RunConfig};

fn main() -> ris_fingerprint::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| format!("target/example-reproduce-{seed}")));
    let cfg = RunConfig::desk(seed);
    let start = Instant::now();
    let run = reproduce(&cfg, &out, |variant, row| {
        println!(
            "{variant:?} step {:>5} val_count_acc {:.3} ({:.0}s)",
            row.step,
            row.val_count_acc,
            start.elapsed().as_secs_f64()
        );
    })?;
    let c = &run.comparison;
    println!("with RIS    {:.3}", run.with_ris.counting_accuracy.overall);
    println!("without RIS {:.3}", run.without_ris.counting_accuracy.overall);
    println!("gain        {:+.1} points", 100.0 * c.accuracy_gain);
    println!("median error with RIS {:?}", run.with_ris.median_error);
    Ok(())
}
