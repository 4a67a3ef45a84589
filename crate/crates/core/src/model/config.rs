use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the hidden representation ε fed to the reparameterization is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// ε = √ᾱ_T · X0 + √(1 − ᾱ_T) · n.
    Diffusion,
    /// ε = X0.
    NoDiffusion,
    /// ε = n, the encoder output X0 is unused.
    StandardEtm,
}

impl Mode {
    pub fn code(self) -> u8 {
        match self {
            Mode::Diffusion => 0,
            Mode::NoDiffusion => 1,
            Mode::StandardEtm => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Mode::Diffusion),
            1 => Some(Mode::NoDiffusion),
            2 => Some(Mode::StandardEtm),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Diffusion => "diffusion",
            Mode::NoDiffusion => "no_diffusion",
            Mode::StandardEtm => "standard_etm",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffusion" => Ok(Mode::Diffusion),
            "no_diffusion" => Ok(Mode::NoDiffusion),
            "standard_etm" => Ok(Mode::StandardEtm),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode `{other}` (expected diffusion, no_diffusion or standard_etm)"
            ))),
        }
    }
}

/// Latent path used when evaluating (validation, perplexity, metrics).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    /// Replace ε by its conditional mean.
    Deterministic,
    /// Draw ε exactly as in training.
    Sampled,
}

impl EvalPath {
    pub fn code(self) -> u8 {
        match self {
            EvalPath::Deterministic => 0,
            EvalPath::Sampled => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EvalPath::Deterministic),
            1 => Some(EvalPath::Sampled),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_topics: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub kl_weight: f64,
    pub mode: Mode,
    pub eval_path: EvalPath,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_topics: 50,
            embed_dim: 300,
            hidden_dim: 800,
            diffusion_steps: 100,
            beta_start: 0.0,
            beta_end: 0.02,
            kl_weight: 1.0,
            mode: Mode::Diffusion,
            eval_path: EvalPath::Deterministic,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.num_topics < 2 {
            return fail(format!("num_topics must be >= 2, got {}", self.num_topics));
        }
        if self.embed_dim < 1 || self.hidden_dim < 1 {
            return fail("embed_dim and hidden_dim must be >= 1".into());
        }
        if !(self.kl_weight >= 0.0) || !self.kl_weight.is_finite() {
            return fail(format!("kl_weight must be finite and >= 0, got {}", self.kl_weight));
        }
        if !(0.0 <= self.beta_start && self.beta_start <= self.beta_end && self.beta_end < 1.0) {
            return fail(format!(
                "need 0 <= beta_start <= beta_end < 1, got {} and {}",
                self.beta_start, self.beta_end
            ));
        }
        Ok(())
    }
}
