//! Compact CNN fire detection: a small NCHW inference engine, the
//! ShuffleNetV2-OnFire and NasNet-A-OnFire architectures with their variant
//! families, final-layer filter pruning, head fine-tuning, SLIC superpixel
//! localisation and the evaluation pipeline around them.

pub mod arch;
pub mod error;
pub mod graph;
pub mod image;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod pipeline;
pub mod preprocess;
pub mod prune;
pub mod superpixel;
pub mod synthetic;
pub mod tensor;
pub mod train;
pub mod weights;

pub use arch::Architecture;
pub use error::{Error, Result};
pub use model::ModelGraph;
pub use tensor::{BatchNormParams, ConvParams, Tensor};
pub use weights::WeightStore;
