//! Implicit generative ensemble post-processing.
//!
//! A linear generator maps the ensemble mean and a latent vector to a joint
//! scenario. The first `D` latents are uniforms whose half-range follows the
//! spread of the ensemble in that dimension, the remaining `J` are fixed
//! `U(-1, 1)` noise. Parameters are fitted by minimising the sample energy
//! score with Adam.

mod adam;
mod generator;
mod latent;
mod loss;
mod model;
mod params;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use generator::{generate, generate_batch};
pub use latent::{ensemble_stats, sample_latent, sample_latents, LatentMode, LatentSpec};
pub use loss::{es_loss, grad_es_loss, loss_and_grad, LossItem};
pub use model::{predict_scenarios, sample_standardized, TrainedGenerator};
pub use params::{parameter_count, GeneratorParams};
pub use train::{train, TrainConfig, TrainOutcome, TrainingExample};
