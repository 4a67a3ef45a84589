//! The diffusion-enhanced embedded topic model.
//!
//! A batch of normalized bag-of-words rows X flows through:
//!
//! * the diffusion encoder, X0 = NN(X), then the closed-form forward
//!   noising ε = √ᾱ_T · X0 + √(1 − ᾱ_T) · n;
//! * the μ and log σ² networks on X, then z = ε ⊙ σ + μ and θ = softmax(z);
//! * the topic-word matrix β = softmax(α ρᵀ) shared by the batch;
//! * X' = θ β, scored by −Σ X log X' plus λ times the Gaussian KL of (μ, σ).

mod checkpoint;
mod config;
mod forward;
mod params;
mod schedule;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{EvalPath, Mode, ModelConfig};
pub use forward::{
    collect, doc_topic_dist, draw_noise, encode_mu_logvar, encode_x0, kl_loss, reconstruct, reconstruction_loss,
    reparameterize, sample_eps, sample_eps_values, topic_word_dist, total_loss, BatchOutput, BatchVars, DiffEtm,
    LatentBatch, Phase, RECON_FLOOR,
};
pub use params::{init_params, param_names, Network, TOPIC_EMBEDDINGS, WORD_EMBEDDINGS};
pub use schedule::NoiseSchedule;
