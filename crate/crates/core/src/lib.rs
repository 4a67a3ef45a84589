//! Diffusion-enhanced embedded topic model.
//!
//! The crate is organised bottom-up:
//!
//! * [`corpus`]: tokenization, vocabulary pruning, bag-of-words vectors,
//!   splits and the binary corpus cache;
//! * [`gradcore`]: dense tensors, a reverse-mode tape, gradient checking
//!   and Adam;
//! * [`model`]: the forward pass, losses, ablation modes and checkpoints;
//! * [`trainer`]: the training loop, checkpoint selection and KL
//!   trajectories;
//! * [`metrics`]: NPMI coherence, diversity, quality and perplexity;
//! * [`cli`]: run configuration, presets and the command implementations
//!   behind the `diffetm` binary.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod gradcore;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
