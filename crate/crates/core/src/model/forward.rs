//! Forward pass and objective.
//!
//! Every stage is a small function over tape variables so that the full
//! batch forward is their composition and each stage can be tested or
//! differentiated in isolation.

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{EvalPath, Mode, ModelConfig};
use super::params::{init_params, Network, TOPIC_EMBEDDINGS, WORD_EMBEDDINGS};
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::gradcore::{ParamStore, Tape, Tensor2D, Var};

/// Lower clamp applied to X' inside the reconstruction log.
pub const RECON_FLOOR: f64 = 1e-12;

/// Standard-normal draws, row-major.
pub fn draw_noise<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Tensor2D {
    Tensor2D::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// X0 = NN(X) through the diffusion encoder.
pub fn encode_x0(tape: &mut Tape, store: &ParamStore, x_norm: Var) -> Result<Var> {
    Network::DiffusionEncoder.record(tape, store, x_norm)
}

/// (μ, log σ²) from two independent networks on the normalized input.
pub fn encode_mu_logvar(tape: &mut Tape, store: &ParamStore, x_norm: Var) -> Result<(Var, Var)> {
    let mu = Network::Mu.record(tape, store, x_norm)?;
    let logvar = Network::LogVar.record(tape, store, x_norm)?;
    Ok((mu, logvar))
}

/// Produces ε for the reparameterization.
///
/// `noise` is a standard-normal tensor shaped like X0; `None` selects the
/// conditional mean of ε (the deterministic evaluation path). Diffusion
/// with ᾱ_T = 1 (no steps, or all β zero) returns X0 itself.
pub fn sample_eps(
    tape: &mut Tape,
    x0: Var,
    schedule: &NoiseSchedule,
    mode: Mode,
    noise: Option<&Tensor2D>,
) -> Result<Var> {
    match mode {
        Mode::NoDiffusion => Ok(x0),
        Mode::Diffusion => {
            let alpha_bar = schedule.final_alpha_bar();
            if alpha_bar == 1.0 {
                return Ok(x0);
            }
            let signal = tape.scale(x0, alpha_bar.sqrt());
            match noise {
                None => Ok(signal),
                Some(n) => {
                    let n = tape.constant(crate::gradcore::ops::scale(n, (1.0 - alpha_bar).sqrt()));
                    tape.add(signal, n)
                }
            }
        }
        Mode::StandardEtm => {
            let (rows, cols) = tape.value(x0).shape();
            Ok(match noise {
                None => tape.constant(Tensor2D::zeros(rows, cols)),
                Some(n) => tape.constant(n.clone()),
            })
        }
    }
}

/// Closed-form draw of X_T | X0 outside any tape, one fresh normal per entry.
pub fn sample_eps_values<R: Rng + ?Sized>(x0: &Tensor2D, schedule: &NoiseSchedule, mode: Mode, rng: &mut R) -> Tensor2D {
    match mode {
        Mode::NoDiffusion => x0.clone(),
        Mode::Diffusion => {
            let a = schedule.final_alpha_bar();
            if a == 1.0 {
                return x0.clone();
            }
            let (s, c) = (a.sqrt(), (1.0 - a).sqrt());
            let mut out = x0.clone();
            for v in out.data_mut() {
                *v = s * *v + c * rng.sample::<f64, _>(StandardNormal);
            }
            out
        }
        Mode::StandardEtm => draw_noise(rng, x0.rows(), x0.cols()),
    }
}

/// z = ε ⊙ exp(logvar / 2) + μ.
pub fn reparameterize(tape: &mut Tape, eps: Var, mu: Var, logvar: Var) -> Result<Var> {
    let half = tape.scale(logvar, 0.5);
    let sigma = tape.exp(half);
    let scaled = tape.hadamard(eps, sigma)?;
    tape.add(scaled, mu)
}

/// θ = softmax(z) per document.
pub fn doc_topic_dist(tape: &mut Tape, z: Var) -> Var {
    tape.softmax_rows(z)
}

/// β = softmax over the vocabulary of α · ρᵀ (K x V).
pub fn topic_word_dist(tape: &mut Tape, topic_emb: Var, word_emb: Var) -> Result<Var> {
    let logits = tape.matmul_bt(topic_emb, word_emb)?;
    Ok(tape.softmax_rows(logits))
}

/// X' = θ · β.
pub fn reconstruct(tape: &mut Tape, theta: Var, beta: Var) -> Result<Var> {
    tape.matmul(theta, beta)
}

/// −Σ_j X_dj log X'_dj averaged over the documents of the batch.
///
/// `floor` clamps X' from below before the log; with `None` a nonpositive
/// entry is a domain error.
pub fn reconstruction_loss(tape: &mut Tape, counts: Var, x_recon: Var, floor: Option<f64>) -> Result<Var> {
    let n = tape.value(counts).rows().max(1);
    let log_x = tape.log_rows(x_recon, floor)?;
    let weighted = tape.hadamard(counts, log_x)?;
    let total = tape.sum_all(weighted);
    Ok(tape.scale(total, -1.0 / n as f64))
}

/// ½ Σ_k (μ² + σ² − log σ² − 1) averaged over documents.
pub fn kl_loss(tape: &mut Tape, mu: Var, logvar: Var) -> Result<Var> {
    let n = tape.value(mu).rows().max(1);
    let mu_sq = tape.hadamard(mu, mu)?;
    let var = tape.exp(logvar);
    let neg_logvar = tape.scale(logvar, -1.0);
    let s = tape.add(mu_sq, var)?;
    let s = tape.add(s, neg_logvar)?;
    let s = tape.add_scalar(s, -1.0);
    let total = tape.sum_all(s);
    Ok(tape.scale(total, 0.5 / n as f64))
}

/// recon + λ · kl.
pub fn total_loss(tape: &mut Tape, recon: Var, kl: Var, kl_weight: f64) -> Result<Var> {
    let weighted = tape.scale(kl, kl_weight);
    tape.add(recon, weighted)
}

/// Tape handles of one recorded batch.
#[derive(Clone, Copy, Debug)]
pub struct BatchVars {
    pub x0: Var,
    pub eps: Var,
    pub mu: Var,
    pub logvar: Var,
    pub z: Var,
    pub theta: Var,
    pub beta: Var,
    pub x_recon: Var,
    pub recon: Var,
    pub kl: Var,
    pub total: Var,
}

/// Per-document latent arrays of one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentBatch {
    pub x0: Tensor2D,
    pub eps: Tensor2D,
    pub mu: Tensor2D,
    pub logvar: Tensor2D,
    pub z: Tensor2D,
    pub theta: Tensor2D,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutput {
    pub latent: LatentBatch,
    pub x_recon: Tensor2D,
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

/// Whether ε is drawn (training) or follows the configured eval path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// A model instance: configuration, schedule and parameters.
#[derive(Clone, Debug)]
pub struct DiffEtm {
    pub config: ModelConfig,
    pub vocab_size: usize,
    pub schedule: NoiseSchedule,
    pub params: ParamStore,
}

impl DiffEtm {
    pub fn new(config: ModelConfig, vocab_size: usize) -> Result<Self> {
        let params = init_params(&config, vocab_size)?;
        Self::from_params(config, vocab_size, params)
    }

    pub fn from_params(config: ModelConfig, vocab_size: usize, params: ParamStore) -> Result<Self> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(Error::InvalidConfig("vocabulary is empty".into()));
        }
        let schedule = NoiseSchedule::linear(config.diffusion_steps, config.beta_start, config.beta_end)?;
        let expected = init_shapes(&config, vocab_size)?;
        for (name, p) in params.iter() {
            match expected.iter().find(|(n, _)| n == name) {
                Some((_, shape)) if *shape == p.value.shape() => {}
                Some((_, shape)) => {
                    return Err(Error::ShapeMismatch {
                        op: "parameter layout",
                        lhs: *shape,
                        rhs: p.value.shape(),
                    })
                }
                None => return Err(Error::UnknownParameter(name.to_owned())),
            }
        }
        if params.len() != expected.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} parameters, found {}",
                expected.len(),
                params.len()
            )));
        }
        Ok(Self {
            config,
            vocab_size,
            schedule,
            params,
        })
    }

    /// Whether a forward pass in `phase` consumes a noise tensor.
    pub fn needs_noise(&self, phase: Phase) -> bool {
        let sampled = phase == Phase::Train || self.config.eval_path == EvalPath::Sampled;
        sampled
            && match self.config.mode {
                Mode::Diffusion => self.schedule.final_alpha_bar() < 1.0,
                Mode::NoDiffusion => false,
                Mode::StandardEtm => true,
            }
    }

    /// Draws the noise for a batch of `rows` documents if `phase` needs it.
    pub fn draw_batch_noise<R: Rng + ?Sized>(&self, phase: Phase, rows: usize, rng: &mut R) -> Option<Tensor2D> {
        self.needs_noise(phase)
            .then(|| draw_noise(rng, rows, self.config.num_topics))
    }

    /// Records the full forward pass and losses of one batch.
    ///
    /// `noise = None` uses the conditional mean of ε.
    pub fn record(
        &self,
        tape: &mut Tape,
        counts: &Tensor2D,
        x_norm: &Tensor2D,
        noise: Option<&Tensor2D>,
    ) -> Result<BatchVars> {
        counts.expect_same_shape(x_norm, "forward inputs")?;
        if counts.cols() != self.vocab_size {
            return Err(Error::ShapeMismatch {
                op: "forward inputs",
                lhs: counts.shape(),
                rhs: (counts.rows(), self.vocab_size),
            });
        }
        let store = &self.params;
        let counts = tape.constant(counts.clone());
        let x = tape.constant(x_norm.clone());

        // The diffusion encoder is skipped when ε does not depend on X0.
        let x0 = match self.config.mode {
            Mode::StandardEtm => tape.constant(Tensor2D::zeros(x_norm.rows(), self.config.num_topics)),
            _ => encode_x0(tape, store, x)?,
        };
        let eps = sample_eps(tape, x0, &self.schedule, self.config.mode, noise)?;
        let (mu, logvar) = encode_mu_logvar(tape, store, x)?;
        let z = reparameterize(tape, eps, mu, logvar)?;
        let theta = doc_topic_dist(tape, z);
        let alpha = tape.param(store, TOPIC_EMBEDDINGS)?;
        let rho = tape.param(store, WORD_EMBEDDINGS)?;
        let beta = topic_word_dist(tape, alpha, rho)?;
        let x_recon = reconstruct(tape, theta, beta)?;
        let recon = reconstruction_loss(tape, counts, x_recon, Some(RECON_FLOOR))?;
        let kl = kl_loss(tape, mu, logvar)?;
        let total = total_loss(tape, recon, kl, self.config.kl_weight)?;
        Ok(BatchVars {
            x0,
            eps,
            mu,
            logvar,
            z,
            theta,
            beta,
            x_recon,
            recon,
            kl,
            total,
        })
    }

    /// Forward pass returning values; noise is drawn from `rng` when `phase` needs it.
    pub fn forward_batch<R: Rng + ?Sized>(
        &self,
        counts: &Tensor2D,
        x_norm: &Tensor2D,
        phase: Phase,
        rng: &mut R,
    ) -> Result<BatchOutput> {
        let noise = self.draw_batch_noise(phase, counts.rows(), rng);
        let mut tape = Tape::new();
        let vars = self.record(&mut tape, counts, x_norm, noise.as_ref())?;
        Ok(collect(&tape, &vars))
    }

    /// Topic-word distribution β (K x V).
    pub fn topic_word(&self) -> Result<Tensor2D> {
        let mut tape = Tape::new();
        let alpha = tape.param(&self.params, TOPIC_EMBEDDINGS)?;
        let rho = tape.param(&self.params, WORD_EMBEDDINGS)?;
        let beta = topic_word_dist(&mut tape, alpha, rho)?;
        Ok(tape.value(beta).clone())
    }
}

/// Reads the values of a recorded batch off the tape.
pub fn collect(tape: &Tape, v: &BatchVars) -> BatchOutput {
    let scalar = |var| tape.value(var).item().expect("scalar loss");
    BatchOutput {
        latent: LatentBatch {
            x0: tape.value(v.x0).clone(),
            eps: tape.value(v.eps).clone(),
            mu: tape.value(v.mu).clone(),
            logvar: tape.value(v.logvar).clone(),
            z: tape.value(v.z).clone(),
            theta: tape.value(v.theta).clone(),
        },
        x_recon: tape.value(v.x_recon).clone(),
        recon: scalar(v.recon),
        kl: scalar(v.kl),
        total: scalar(v.total),
    }
}

fn init_shapes(config: &ModelConfig, vocab_size: usize) -> Result<Vec<(String, (usize, usize))>> {
    let (v, h, k, e) = (vocab_size, config.hidden_dim, config.num_topics, config.embed_dim);
    let mut out = Vec::new();
    for net in Network::ALL {
        for (layer, (fan_in, fan_out)) in [(v, h), (h, h), (h, k)].into_iter().enumerate() {
            out.push((net.weight(layer), (fan_in, fan_out)));
            out.push((net.bias(layer), (1, fan_out)));
        }
    }
    out.push((TOPIC_EMBEDDINGS.to_owned(), (k, e)));
    out.push((WORD_EMBEDDINGS.to_owned(), (v, e)));
    Ok(out)
}
