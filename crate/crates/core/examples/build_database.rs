//! Enumerates placement cases, sweeps the codebook for every case and
//! repetition, splits per case and writes the database directory.
//!
//!     cargo run --release --example build_database -- [OUT_DIR]

use ris_fingerprint::dataset::{build_database, enumerate_cases, split, Split, SplitCounts, SplitMode};
use ris_fingerprint::pipeline::RunConfig;

fn main() -> ris_fingerprint::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example-database".into());
    let cfg = RunConfig::desk(0);
    let radio = cfg.radio();
    let scene = cfg.scene()?;
    let codebook = cfg.build_codebook(&scene)?;

    let cases = enumerate_cases(scene.reference_count(), 3)?;
    println!("{} placement cases over {} reference points", cases.len(), scene.reference_count());
    for case in cases.iter().take(6) {
        println!("  case {:>2}: {:?}", case.case_id, case.occupied);
    }

    let db = build_database(&scene, &radio, &codebook, &cases, 10, 1)?;
    let db = split(db, SplitCounts::new(6, 2, 2), 2, SplitMode::Repetition)?;
    println!(
        "{} records = {} cases x {} beams x {} repetitions",
        db.records.len(),
        db.cases.len(),
        db.beam_count(),
        db.samples_per_case
    );
    for which in [Split::Train, Split::Val, Split::Test] {
        println!("  {which:?}: {} repetitions", db.members(which).len());
    }
    println!("label of case 13: {:?}", db.label(13));
    db.save(std::path::Path::new(&out))?;
    println!("written to {out}");
    Ok(())
}
