//! Parameter registry and the small set of layers the models are built from.

mod layers;
mod params;

pub use layers::{Act, Conv, ConvBlock, ConvSpec, Deconv, InstanceNorm, RELU_GAIN};
pub(crate) use params::dim_error;
pub use params::{NamedTensor, ParamStore};
