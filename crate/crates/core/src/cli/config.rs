//! Run configuration: a flat JSON object layered over defaults and presets.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::model::{EvalPath, Mode, ModelConfig};
use crate::trainer::TrainConfig;

/// Every key a config file may set. Unknown keys are rejected.
///
/// Defaults follow the 20NewsGroup K=50 setting except for `min_df`,
/// which depends on the corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Pooled raw corpus, one document per line. Default: none.
    pub input: Option<PathBuf>,
    /// Pre-split raw corpora; all three or none. Default: none.
    pub train_file: Option<PathBuf>,
    pub valid_file: Option<PathBuf>,
    pub test_file: Option<PathBuf>,
    /// Stop-word list, one word per line. Default: none.
    pub stopwords: Option<PathBuf>,
    /// Document-frequency threshold. Default 1.
    pub min_df: usize,
    /// Train/valid/test fractions for a pooled input. Default [0.8, 0.1, 0.1].
    pub split_fractions: [f64; 3],
    /// Corpus cache directory. Default `<out>/corpus`.
    pub corpus_dir: Option<PathBuf>,

    /// K. Default 50.
    pub num_topics: usize,
    /// E. Default 300.
    pub embed_dim: usize,
    /// H. Default 800.
    pub hidden_dim: usize,
    /// T. Default 100.
    pub diffusion_steps: usize,
    /// Default 0.
    pub beta_start: f64,
    /// Default 0.02.
    pub beta_end: f64,
    /// λ. Default 1.
    pub kl_weight: f64,
    /// `diffusion`, `no_diffusion` or `standard_etm`. Default `diffusion`.
    pub mode: Mode,
    /// `deterministic` or `sampled`. Default `deterministic`.
    pub eval_path: EvalPath,
    /// Default 0.
    pub seed: u64,

    /// Default 300.
    pub epochs: usize,
    /// Default 1000.
    pub batch_size: usize,
    /// Default 0.008.
    pub learning_rate: f64,
    /// Default 1.
    pub eval_every: usize,
    /// Improving checkpoints kept besides `best.ckpt`; null keeps all. Default 5.
    pub max_checkpoints: Option<usize>,
    /// Gradient-norm clip; null disables. Default null.
    pub clip_norm: Option<f64>,
    /// Omit wall-clock time so reruns are byte-identical. Default true.
    pub deterministic: bool,

    /// Root of all outputs. Default `runs`.
    pub out: PathBuf,
    /// Checkpoint for eval/topics. Default `<out>/<run_id>/best.ckpt`.
    pub checkpoint: Option<PathBuf>,
    /// Split scored by eval. Default `test`.
    pub eval_split: Split,
    /// Words per topic written by `topics`. Default 25.
    pub top_n: usize,
    /// Diffusion steps trained by sweep-t. Default [0, 20, 50, 100, 150, 200].
    pub t_values: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        Self {
            input: None,
            train_file: None,
            valid_file: None,
            test_file: None,
            stopwords: None,
            min_df: 1,
            split_fractions: [0.8, 0.1, 0.1],
            corpus_dir: None,
            num_topics: model.num_topics,
            embed_dim: model.embed_dim,
            hidden_dim: model.hidden_dim,
            diffusion_steps: model.diffusion_steps,
            beta_start: model.beta_start,
            beta_end: model.beta_end,
            kl_weight: model.kl_weight,
            mode: model.mode,
            eval_path: model.eval_path,
            seed: model.seed,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            eval_every: train.eval_every,
            max_checkpoints: train.max_checkpoints,
            clip_norm: train.clip_norm,
            deterministic: train.deterministic,
            out: PathBuf::from("runs"),
            checkpoint: None,
            eval_split: Split::Test,
            top_n: 25,
            t_values: vec![0, 20, 50, 100, 150, 200],
        }
    }
}

/// Named settings from the published experiments.
pub const PRESETS: [&str; 6] = ["20ng-k50", "20ng-k100", "20ng-k200", "nyt-3000", "nyt-5000", "nyt-10000"];

/// Preset keys as a JSON object, to be layered over the defaults.
pub fn preset(name: &str) -> Result<Map<String, Value>> {
    let (k, lr, batch, min_df): (usize, f64, usize, Option<usize>) = match name {
        "20ng-k50" => (50, 0.008, 1000, None),
        "20ng-k100" => (100, 0.009, 1000, None),
        "20ng-k200" => (200, 0.01, 1000, None),
        "nyt-3000" => (50, 0.007, 512, Some(3000)),
        "nyt-5000" => (50, 0.007, 512, Some(5000)),
        "nyt-10000" => (50, 0.008, 512, Some(10000)),
        other => {
            return Err(Error::Config {
                key: "preset".into(),
                detail: format!("unknown preset `{other}`, expected one of {}", PRESETS.join(", ")),
            })
        }
    };
    let mut m = Map::new();
    m.insert("num_topics".into(), k.into());
    m.insert("learning_rate".into(), lr.into());
    m.insert("batch_size".into(), batch.into());
    m.insert("embed_dim".into(), 300.into());
    m.insert("diffusion_steps".into(), 100.into());
    m.insert("beta_start".into(), 0.0.into());
    m.insert("beta_end".into(), 0.02.into());
    m.insert("kl_weight".into(), 1.0.into());
    if let Some(df) = min_df {
        m.insert("min_df".into(), df.into());
    }
    Ok(m)
}

/// Overrides given on the command line; they win over the file and preset.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub deterministic: bool,
    /// Extra `(key, value)` pairs from command-specific flags.
    pub keys: Vec<(String, Value)>,
}

impl RunConfig {
    /// defaults < preset < file < overrides. A `"preset"` key in the file
    /// selects a preset unless one is given on the command line.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut file_map = match file {
            None => Map::new(),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => {
                        return Err(Error::Config {
                            key: "<root>".into(),
                            detail: format!("{} must hold a JSON object", path.display()),
                        })
                    }
                    Err(e) => {
                        return Err(Error::Config {
                            key: "<root>".into(),
                            detail: format!("{}: {e}", path.display()),
                        })
                    }
                }
            }
        };
        let file_preset = match file_map.remove("preset") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s),
            Some(other) => {
                return Err(Error::Config {
                    key: "preset".into(),
                    detail: format!("expected a preset name string, got {other}"),
                })
            }
        };
        let mut merged = match serde_json::to_value(RunConfig::default())? {
            Value::Object(m) => m,
            _ => unreachable!("RunConfig serializes to an object"),
        };
        if let Some(unknown) = file_map.keys().find(|k| !merged.contains_key(*k)) {
            let known: Vec<&str> = merged.keys().map(String::as_str).collect();
            return Err(Error::Config {
                key: unknown.clone(),
                detail: format!("unknown key, expected one of: preset, {}", known.join(", ")),
            });
        }
        if let Some(name) = overrides.preset.as_deref().or(file_preset.as_deref()) {
            merged.extend(preset(name)?);
        }
        merged.extend(file_map);
        if let Some(seed) = overrides.seed {
            merged.insert("seed".into(), seed.into());
        }
        if let Some(out) = &overrides.out {
            merged.insert("out".into(), Value::String(out.display().to_string()));
        }
        if overrides.deterministic {
            merged.insert("deterministic".into(), true.into());
        }
        for (k, v) in &overrides.keys {
            merged.insert(k.clone(), v.clone());
        }
        let config: RunConfig = serde_path_to_error::deserialize(Value::Object(merged)).map_err(|e| {
            let key = e.path().to_string();
            Error::Config {
                key: if key == "." { "<root>".into() } else { key },
                detail: e.into_inner().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            num_topics: self.num_topics,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            diffusion_steps: self.diffusion_steps,
            beta_start: self.beta_start,
            beta_end: self.beta_end,
            kl_weight: self.kl_weight,
            mode: self.mode,
            eval_path: self.eval_path,
            seed: self.seed,
        }
    }

    pub fn train_config(&self, output_dir: Option<PathBuf>) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            eval_every: self.eval_every,
            max_checkpoints: self.max_checkpoints,
            deterministic: self.deterministic,
            output_dir,
            clip_norm: self.clip_norm,
        }
    }

    /// Value checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        let key_err = |key: &str, e: Error| Error::Config {
            key: key.into(),
            detail: e.to_string(),
        };
        self.model_config().validate().map_err(|e| key_err("model", e))?;
        self.train_config(None).validate().map_err(|e| key_err("training", e))?;
        if self.min_df == 0 {
            return Err(Error::Config {
                key: "min_df".into(),
                detail: "expected an integer >= 1".into(),
            });
        }
        let f = self.split_fractions;
        if f.iter().any(|&x| !(x > 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config {
                key: "split_fractions".into(),
                detail: format!("expected three positive fractions summing to 1, got {f:?}"),
            });
        }
        let presplit = [&self.train_file, &self.valid_file, &self.test_file];
        let n = presplit.iter().filter(|p| p.is_some()).count();
        if n != 0 && n != 3 {
            return Err(Error::Config {
                key: "train_file".into(),
                detail: "train_file, valid_file and test_file must be given together".into(),
            });
        }
        if n == 3 && self.input.is_some() {
            return Err(Error::Config {
                key: "input".into(),
                detail: "give either `input` or the three per-split files, not both".into(),
            });
        }
        if self.top_n == 0 {
            return Err(Error::Config {
                key: "top_n".into(),
                detail: "expected an integer >= 1".into(),
            });
        }
        if self.t_values.is_empty() {
            return Err(Error::Config {
                key: "t_values".into(),
                detail: "expected a non-empty list of step counts".into(),
            });
        }
        Ok(())
    }

    /// Fails if a configured path is missing.
    pub fn require_path(&self, key: &str, path: Option<&Path>) -> Result<PathBuf> {
        match path {
            None => Err(Error::Config {
                key: key.into(),
                detail: "required by this command but not set".into(),
            }),
            Some(p) if !p.exists() => Err(Error::Config {
                key: key.into(),
                detail: format!("path {} does not exist", p.display()),
            }),
            Some(p) => Ok(p.to_path_buf()),
        }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.corpus_dir.clone().unwrap_or_else(|| self.out.join("corpus"))
    }

    /// Short hash of the settings that determine a training run.
    ///
    /// Output locations and eval/topics/sweep options are left out, so
    /// `train` and a later `eval` with the same file share a directory.
    pub fn run_id(&self) -> String {
        let mut v = serde_json::to_value(self).expect("RunConfig serializes");
        if let Value::Object(m) = &mut v {
            for k in ["out", "corpus_dir", "checkpoint", "eval_split", "top_n", "t_values", "deterministic"] {
                m.remove(k);
            }
        }
        let canonical = serde_json::to_vec(&v).expect("value serializes");
        hex::encode(&Sha256::digest(&canonical)[..6])
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out.join(self.run_id())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
