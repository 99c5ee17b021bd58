//! Synthetic paired data: scene generation, degradation, manifests, batching.

mod batch;
mod degrade;
mod manifest;
mod synth;

pub use batch::{Batch, BatchStream, EpochBatches};
pub use degrade::{
    darken, darken_value, degrade, DegradeParams, EXPOSURE_RANGE, GAMMA_RANGE, NOISE_RANGE, QUALITY_CHOICES,
};
pub use manifest::{
    generate_dataset, load_split, DatasetManifest, DatasetSpec, ManifestRecord, PairedSample, Split, MANIFEST_FILE,
};
pub use synth::synth_scene;
