//! Mini-batch training with validation-driven checkpoint selection.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{BowCorpus, Dataset};
use crate::error::{Error, Result};
use crate::gradcore::{adam_update, AdamConfig, AdamState, Tape, Tensor2D};
use crate::metrics::evaluate_split;
use crate::model::{save_checkpoint, DiffEtm, Mode, ModelConfig, Phase};

pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const REPORT_FILE: &str = "train_report.json";
pub const TRAJECTORY_FILE: &str = "kl_trajectory.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Validate every this many epochs (the last epoch is always validated).
    pub eval_every: usize,
    /// Improving checkpoints kept on disk besides `best.ckpt`; `None` keeps all.
    pub max_checkpoints: Option<usize>,
    /// Leave wall-clock time out of the report so reruns are byte-identical.
    pub deterministic: bool,
    pub output_dir: Option<PathBuf>,
    /// Rescale gradients whose global norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 1000,
            learning_rate: 0.008,
            eval_every: 1,
            max_checkpoints: Some(5),
            deterministic: true,
            output_dir: None,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::InvalidConfig(
                "epochs, batch_size and eval_every must all be >= 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidConfig(format!("clip_norm must be > 0, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_recon: f64,
    pub train_kl: f64,
    /// KL to the prior of a diagonal Gaussian fitted to the epoch's realized z.
    /// Logged next to `train_kl`; the two need not agree under diffusion.
    pub train_kl_empirical: Option<f64>,
    pub train_total: f64,
    pub valid_perplexity: Option<f64>,
    pub valid_kl: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub mode: Mode,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_valid_perplexity: Option<f64>,
    pub wall_clock_seconds: Option<f64>,
    /// Set when training stopped on a non-finite loss.
    pub diverged: Option<String>,
}

impl TrainReport {
    pub fn valid_perplexities(&self) -> Vec<Option<f64>> {
        self.epochs.iter().map(|e| e.valid_perplexity).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlPoint {
    pub epoch: usize,
    pub kl: f64,
    pub perplexity: f64,
}

/// KL term at each checkpoint that improved on every earlier one.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KlTrajectory {
    pub points: Vec<KlPoint>,
}

impl KlTrajectory {
    /// Keeps exactly the points whose perplexity beats all earlier points.
    pub fn from_points(points: impl IntoIterator<Item = KlPoint>) -> Self {
        let mut best = f64::INFINITY;
        let points = points
            .into_iter()
            .filter(|p| {
                let better = p.perplexity < best;
                if better {
                    best = p.perplexity;
                }
                better
            })
            .collect();
        Self { points }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,kl,perplexity\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.epoch, p.kl, p.perplexity));
        }
        out
    }
}

/// Running per-coordinate moments of latent rows.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentMoments {
    rows: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl LatentMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            rows: 0,
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
        }
    }

    pub fn add(&mut self, z: &Tensor2D) {
        for r in 0..z.rows() {
            for (k, &x) in z.row(r).iter().enumerate() {
                self.sum[k] += x;
                self.sum_sq[k] += x * x;
            }
        }
        self.rows += z.rows();
    }

    /// KL(N(m, diag v) ‖ N(0, I)) for the moment-matched fit; `None` with
    /// fewer than two rows or a degenerate coordinate.
    pub fn kl_to_prior(&self) -> Option<f64> {
        if self.rows < 2 {
            return None;
        }
        let n = self.rows as f64;
        let kl: f64 = self
            .sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(&s, &ss)| {
                let m = s / n;
                let v = (ss / n - m * m).max(0.0);
                0.5 * (m * m + v - v.ln() - 1.0)
            })
            .sum();
        kl.is_finite().then_some(kl)
    }
}

/// Extracts the improving-checkpoint epochs of a finished run.
pub fn log_kl_trajectory(report: &TrainReport) -> KlTrajectory {
    KlTrajectory::from_points(report.epochs.iter().filter_map(|e| {
        Some(KlPoint {
            epoch: e.epoch,
            kl: e.valid_kl?,
            perplexity: e.valid_perplexity?,
        })
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Validation {
    pub perplexity: f64,
    pub kl: f64,
}

/// Perplexity and mean closed-form KL over a validation split.
pub fn validate(model: &DiffEtm, valid: &BowCorpus, batch_size: usize) -> Result<Validation> {
    let eval = evaluate_split(model, valid, batch_size)?;
    Ok(Validation {
        perplexity: eval.perplexity(),
        kl: eval.mean_kl(),
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub trajectory: KlTrajectory,
    /// Parameters at the best validation epoch.
    pub best: DiffEtm,
    /// Parameters after the final epoch.
    pub last: DiffEtm,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn checkpoint_name(epoch: usize) -> String {
    format!("checkpoint-epoch{epoch:05}.ckpt")
}

/// Lists retained `checkpoint-epochNNNNN.ckpt` files in epoch order.
pub fn list_checkpoints(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(epoch) = name
            .strip_prefix("checkpoint-epoch")
            .and_then(|s| s.strip_suffix(".ckpt"))
            .and_then(|s| s.parse().ok())
        {
            out.push((epoch, path));
        }
    }
    out.sort();
    Ok(out)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Trains a fresh model on `data.train`, validating on `data.valid`.
pub fn train(model_config: &ModelConfig, config: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    let model = DiffEtm::new(model_config.clone(), data.vocab_size())?;
    train_model(model, config, data)
}

/// Trains an existing model in place of a fresh initialization.
pub fn train_model(mut model: DiffEtm, config: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    if data.train.is_empty() || data.valid.is_empty() {
        return Err(Error::InvalidConfig("train and valid splits must be non-empty".into()));
    }
    if data.vocab_size() != model.vocab_size {
        return Err(Error::VocabularyMismatch(format!(
            "model has V={}, dataset has V={}",
            model.vocab_size,
            data.vocab_size()
        )));
    }
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let vocab_ref = data.vocab.fingerprint();
    let seed = model.config.seed;
    let started = Instant::now();
    let mut shuffle_rng = stream_rng(seed, 1);
    let mut noise_rng = stream_rng(seed, 2);
    let mut adam = AdamState::new(AdamConfig::with_lr(config.learning_rate), &model.params)?;
    model.params.zero_grads();

    let mut report = TrainReport {
        seed,
        mode: model.config.mode,
        epochs: Vec::with_capacity(config.epochs),
        best_epoch: None,
        best_valid_perplexity: None,
        wall_clock_seconds: None,
        diverged: None,
    };
    let mut best = model.clone();
    let mut retained: Vec<PathBuf> = Vec::new();
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut recon_sum, mut kl_sum, mut total_sum) = (0.0, 0.0, 0.0);
        let mut moments = LatentMoments::new(model.config.num_topics);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let (counts, norm) = data.train.batch(chunk);
            let noise = model.draw_batch_noise(Phase::Train, chunk.len(), &mut noise_rng);
            let mut tape = Tape::new();
            let vars = model.record(&mut tape, &counts, &norm, noise.as_ref())?;
            let total = tape.value(vars.total).item().expect("scalar");
            let grad_ok = total.is_finite() && {
                tape.backward(vars.total, &mut model.params)?;
                model.params.grad_norm().is_finite()
            };
            if !grad_ok {
                let err = Error::Diverged {
                    epoch,
                    batch: b,
                    loss: total,
                };
                report.diverged = Some(err.to_string());
                finish_report(&mut report, config, started);
                if let Some(dir) = &config.output_dir {
                    write_file(&dir.join(REPORT_FILE), report.to_json()?.as_bytes())?;
                }
                return Err(err);
            }
            if let Some(max) = config.clip_norm {
                let norm = model.params.grad_norm();
                if norm > max {
                    model.params.scale_grads(max / norm);
                }
            }
            adam_update(&mut model.params, &mut adam)?;
            let n = chunk.len() as f64;
            recon_sum += n * tape.value(vars.recon).item().expect("scalar");
            kl_sum += n * tape.value(vars.kl).item().expect("scalar");
            total_sum += n * total;
            moments.add(tape.value(vars.z));
        }
        let docs = data.train.len() as f64;
        let mut record = EpochRecord {
            epoch,
            train_recon: recon_sum / docs,
            train_kl: kl_sum / docs,
            train_kl_empirical: moments.kl_to_prior(),
            train_total: total_sum / docs,
            valid_perplexity: None,
            valid_kl: None,
        };
        if epoch % config.eval_every == 0 || epoch == config.epochs {
            let v = validate(&model, &data.valid, config.batch_size)?;
            record.valid_perplexity = Some(v.perplexity);
            record.valid_kl = Some(v.kl);
            if report.best_valid_perplexity.is_none_or(|b| v.perplexity < b) {
                report.best_epoch = Some(epoch);
                report.best_valid_perplexity = Some(v.perplexity);
                best = model.clone();
                if let Some(dir) = &config.output_dir {
                    let path = dir.join(checkpoint_name(epoch));
                    save_checkpoint(&model, &vocab_ref, &path)?;
                    fs::copy(&path, dir.join(BEST_CHECKPOINT)).map_err(|e| Error::io(&path, e))?;
                    retained.push(path);
                    if let Some(max) = config.max_checkpoints {
                        while retained.len() > max {
                            let old = retained.remove(0);
                            fs::remove_file(&old).map_err(|e| Error::io(&old, e))?;
                        }
                    }
                }
            }
            log::debug!(
                "epoch {epoch}: train total {:.4} (recon {:.4}, kl {:.4}), valid ppl {:.3}, kl {:.4}",
                record.train_total,
                record.train_recon,
                record.train_kl,
                v.perplexity,
                v.kl
            );
        }
        report.epochs.push(record);
    }

    finish_report(&mut report, config, started);
    let trajectory = log_kl_trajectory(&report);
    if let Some(dir) = &config.output_dir {
        write_file(&dir.join(REPORT_FILE), report.to_json()?.as_bytes())?;
        write_file(&dir.join(TRAJECTORY_FILE), trajectory.to_csv().as_bytes())?;
    }
    Ok(TrainOutcome {
        report,
        trajectory,
        best,
        last: model,
    })
}

fn finish_report(report: &mut TrainReport, config: &TrainConfig, started: Instant) {
    if !config.deterministic {
        report.wall_clock_seconds = Some(started.elapsed().as_secs_f64());
    }
}
