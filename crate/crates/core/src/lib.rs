//! Synthetic FISH patch generation, joint contrastive + cross-entropy
//! training of a small classifier, and entropy-based uncertainty
//! calibration.
//!
//! - [`synthgen`]: labeled patch synthesis and dataset manifests
//! - [`augment`]: the augmentation set with heavy/light presets
//! - [`lossmath`]: NT-Xent, label-smoothed cross entropy and their gradients
//! - [`tinynet`]: encoder/projector/classifier network and training
//! - [`uncert`]: normalized entropy, ECE decomposition, certainty conditioning

pub mod error;
pub mod patch;
pub mod seed;
pub mod synthgen;
pub mod augment;
pub mod lossmath;
pub mod tinynet;
pub mod uncert;

pub use error::{Error, ErrorKind, Result};
pub use patch::{Channel, Grid, Patch};
pub use synthgen::{ClassConfig, ClassId, GenerationSpec, PatchLabel};
pub use tinynet::{Architecture, Checkpoint, TrainConfig, TrainMode};
pub use uncert::PredictionRecord;
