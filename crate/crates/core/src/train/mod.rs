//! Two-stage training: optimizer, schedule, checkpoints, trainers and the
//! evaluation protocols built on them.

mod adam;
mod checkpoint;
mod config;
mod eval;
mod log;
mod stage1;
mod stage2;
mod store;

pub use adam::{clip_grad_norm, Adam, ADAM_EPS, BETA1, BETA2};
pub use checkpoint::{Checkpoint, DTYPE_F32, MAGIC, VERSION_CHECKSUMMED, VERSION_PLAIN};
pub use config::{lr_at, TrainConfig};
pub use eval::{
    ablate_levels, evaluate_enhancement, full_beats_single, latent_image_gap, summarize_evals, AblationRow, LatentGap,
    PairEval,
};
pub use log::LossLog;
pub use stage1::{reconstruction_l1, train_stage1, DomainModels, Stage1};
pub use stage2::{train_stage2, Stage2};
pub use store::{checkpoint_path, derive_seed, load_vaes, open_checkpoint, save_model, Domain, SeedTag, TrainedModels};
