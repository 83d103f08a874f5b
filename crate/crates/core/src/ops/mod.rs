//! Numeric kernels. Every function is pure: inputs are borrowed, outputs are new tensors.

mod activation;
mod channel;
mod conv;
mod linear;
mod norm;
mod pool;
mod resize;

pub use activation::{relu, sigmoid};
pub use channel::{
    add, channel_shuffle, channel_split, concat_channels, shift_crop, shuffled_position, slice_channels,
};
pub use conv::{conv2d, depthwise_conv2d};
pub use linear::linear;
pub use norm::batch_norm_infer;
pub use pool::{avg_pool2d, global_avg_pool, max_pool2d, PoolParams};
pub use resize::bilinear_resize;
