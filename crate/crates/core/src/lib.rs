//! Word-level CNN text classifiers with gapped ("skipped") convolution
//! windows and a GRU variant, plus corpus long-tail analysis and a k-fold
//! evaluation harness. Everything is implemented on a small dense `f64`
//! tensor type with hand-written backward passes.

pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod layers;
pub mod longtail;
pub mod model;
pub mod preprocess;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use tensor::Tensor;
