//! From-scratch encoder-decoder transformer with reverse-mode autodiff.

pub mod checkpoint;
pub mod config;
pub mod gradcheck;
pub mod graph;
pub mod params;
pub mod tensor;
pub mod train;
pub mod transformer;

pub use checkpoint::Checkpoint;
pub use config::{ModelConfig, Profile};
pub use graph::{Graph, Var};
pub use params::ModelParams;
pub use tensor::Tensor;
pub use transformer::{predict, Session};
pub use train::{train, Example, TrainConfig, TrainingLog};
