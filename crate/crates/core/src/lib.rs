//! Latent-space low-light enhancement of compressed images.

pub mod codec;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod image;
pub mod mapping;
pub mod metrics;
pub mod nn;
pub mod ppm;
pub mod train;
pub mod vae;

pub use error::{Error, Result};
pub use image::Image;
