//! Device-free multi-person localisation from RIS-steered Wi-Fi CSI.
//!
//! The pipeline runs: build a beam codebook for the RIS panel, simulate the
//! channel for every placement of people on a reference grid, turn each group
//! of per-beam CSI captures into one normalised feature sequence, and train a
//! sequence-to-sequence transformer that emits the occupied grid coordinates.

pub mod channel;
pub mod codebook;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod seed;
pub mod tokens;

// Attention allocates and frees multi-megabyte buffers every step; the
// system allocator hands them back to the OS each time and the page faults
// cost more than the arithmetic.
#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub use error::{Error, Result};
