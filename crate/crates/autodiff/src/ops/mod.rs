mod conv;
mod elementwise;
mod norm;
mod reduce;
mod shape;
mod upsample;

pub use conv::{conv2d, conv_transpose2d};
pub use elementwise::{add, add_scalar, clamp01, exp, leaky_relu, mul, relu, scale, sigmoid, square, sub};
pub use norm::{instance_norm, INSTANCE_NORM_EPS};
pub use reduce::{l1_loss, mean, mse_loss, sum};
pub use shape::{channel_mean, concat_channels, crop2d, mul_broadcast, spatial_mean};
pub use upsample::bilinear_upsample;
