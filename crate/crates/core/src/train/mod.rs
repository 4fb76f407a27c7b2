//! GAN training: losses, Adam, flip augmentation and the alternating
//! discriminator/generator step.

mod adam;
mod losses;
mod trainer;

pub use adam::{AdamConfig, AdamState};
pub use losses::{
    adversarial_loss, content_loss, discriminator_loss, perceptual_loss, LossBreakdown, ADVERSARIAL_WEIGHT, LOG_CLAMP,
};
pub use trainer::{augment, CheckpointMeta, PairSet, TrainConfig, Trainer};
