//! Central-difference check of the hand-written backward pass on the tiny
//! model.
//!
//!     cargo run --release --example gradient_check

use ris_fingerprint::model::gradcheck::{gradient_check, random_batch, FD_STEP};
use ris_fingerprint::model::{ModelConfig, ModelParams, Profile};

fn main() -> ris_fingerprint::Result<()> {
    let params = ModelParams::init(&ModelConfig::profile(Profile::Tiny, 6, 9, 3, 1))?;
    println!("{} parameters in {} tensors", params.count(), params.tensors.len());
    let batch = random_batch(&params, 4, 2);
    let report = gradient_check(&params, &batch, 400, 3)?;
    println!("step {FD_STEP:e}, {} coordinates", report.entries.len());
    println!("max relative error {:.3e}", report.max_relative_error);
    if let Some(w) = report.worst() {
        println!("worst: {}[{}] analytic {:.9e} numeric {:.9e}", w.name, w.index, w.analytic, w.numeric);
    }
    Ok(())
}
