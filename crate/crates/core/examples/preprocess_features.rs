//! Turns one case repetition (six beams, two antenna pairs, 52 subcarriers)
//! into the normalised sequence the model reads.
//!
//!     cargo run --release --example preprocess_features

use ris_fingerprint::dataset::{build_database, enumerate_cases};
use ris_fingerprint::pipeline::RunConfig;
use ris_fingerprint::preprocess::{concat_features, database_features, maxmin_normalize};

fn main() -> ris_fingerprint::Result<()> {
    let cfg = RunConfig::desk(0);
    let scene = cfg.scene()?;
    let codebook = cfg.build_codebook(&scene)?;
    let cases = enumerate_cases(4, 3)?;
    let db = build_database(&scene, &cfg.radio(), &codebook, &cases, 2, 3)?;

    let group = db.group(5, 0);
    let raw = &group[0].amplitudes[0];
    let norm = maxmin_normalize(raw)?;
    println!("beam 0, pair 0, first subcarriers raw  {:?}", &raw[..4]);
    println!("                               scaled {:?}", &norm[..4]);

    let f = concat_features(&group)?;
    println!(
        "sequence length {} = {} pairs x {} beams x {} subcarriers",
        f.len(),
        f.antenna_pairs,
        f.beams,
        f.subcarriers
    );
    for (p, r, k) in [(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 5, 51)] {
        println!("  (pair {p}, beam {r}, subcarrier {k:>2}) -> position {:>3}", f.index(p, r, k));
    }

    let all = database_features(&db)?;
    println!("{} feature sequences for the whole database", all.len());
    Ok(())
}
