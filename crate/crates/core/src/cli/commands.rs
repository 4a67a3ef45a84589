//! Command implementations. Each one validates its inputs before writing
//! anything, then leaves a manifest next to its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::manifest::{Artifact, Manifest, Status};
use crate::corpus::{ingest as ingest_corpus, load_stopwords, Dataset, IngestOptions, RawCorpus, Split};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_model, evaluate_split, top_words, top_words_tsv, MetricsReport};
use crate::model::{load_checkpoint, Checkpoint};
use crate::synth::{generate_lines, SyntheticSpec};
use crate::trainer::{self, list_checkpoints, KlPoint, KlTrajectory, TrainReport, BEST_CHECKPOINT, REPORT_FILE, TRAJECTORY_FILE};

pub const INGEST_REPORT: &str = "ingest_report.json";
pub const CONFIG_FILE: &str = "config.json";
pub const TOP_WORDS_FILE: &str = "top_words.tsv";
pub const TOPICS_FILE: &str = "topics.tsv";
pub const SWEEP_FILE: &str = "sweep_t.csv";
pub const KL_TEST_FILE: &str = "kl_test.csv";
pub const SWEEP_HEADER: &str = "T,coherence,diversity,quality,perplexity,status";

pub fn metrics_file(split: Split) -> String {
    format!("metrics-{}.json", split.name())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_corpus(cfg: &RunConfig) -> Result<Dataset> {
    let dir = cfg.require_path("corpus_dir", Some(&cfg.corpus_dir()))?;
    Dataset::load(&dir)
}

fn load_matching_checkpoint(path: &Path, data: &Dataset) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    if ckpt.model.vocab_size != data.vocab_size() {
        return Err(Error::VocabularyMismatch(format!(
            "checkpoint {} has V={}, corpus has V={}",
            path.display(),
            ckpt.model.vocab_size,
            data.vocab_size()
        )));
    }
    let fp = data.vocab.fingerprint();
    if ckpt.vocab_ref != fp {
        return Err(Error::VocabularyMismatch(format!(
            "checkpoint {} was trained on vocabulary {}, corpus has {fp}",
            path.display(),
            ckpt.vocab_ref
        )));
    }
    Ok(ckpt)
}

fn checkpoint_path(cfg: &RunConfig) -> Result<PathBuf> {
    let default = cfg.run_dir().join(BEST_CHECKPOINT);
    cfg.require_path("checkpoint", Some(cfg.checkpoint.as_deref().unwrap_or(&default)))
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Tokenizes, prunes and splits the raw corpus into `corpus_dir`.
pub fn ingest(cfg: &RunConfig, argv: &[String]) -> Result<PathBuf> {
    let raw_paths: Vec<PathBuf> = if cfg.train_file.is_some() {
        vec![
            cfg.require_path("train_file", cfg.train_file.as_deref())?,
            cfg.require_path("valid_file", cfg.valid_file.as_deref())?,
            cfg.require_path("test_file", cfg.test_file.as_deref())?,
        ]
    } else {
        vec![cfg.require_path("input", cfg.input.as_deref())?]
    };
    let stopwords = match &cfg.stopwords {
        Some(p) => load_stopwords(&cfg.require_path("stopwords", Some(p))?)?,
        None => Default::default(),
    };
    let mut lines = raw_paths
        .iter()
        .map(|p| RawCorpus::read_lines(p))
        .collect::<Result<Vec<_>>>()?;
    let raw = if lines.len() == 3 {
        let test = lines.pop().unwrap();
        let valid = lines.pop().unwrap();
        RawCorpus::PreSplit([lines.pop().unwrap(), valid, test])
    } else {
        RawCorpus::Pooled(lines.pop().unwrap())
    };
    let opts = IngestOptions {
        min_df: cfg.min_df,
        stopwords,
        fractions: cfg.split_fractions,
        seed: cfg.seed,
    };
    let (data, report) = ingest_corpus(&raw, &opts)?;
    log::info!(
        "ingested {} documents ({} dropped), V={}, splits {}/{}/{}",
        report.documents_read,
        report.documents_dropped,
        report.vocab_size,
        report.train_docs,
        report.valid_docs,
        report.test_docs
    );

    let dir = cfg.corpus_dir();
    create_dir(&dir)?;
    let mut files = data.save(&dir)?;
    let report_path = dir.join(INGEST_REPORT);
    write(&report_path, serde_json::to_string_pretty(&report)?)?;
    files.push(report_path);
    Manifest::new("ingest", cfg, argv).write(&dir, &files)
}

/// Trains into `out/<run_id>` and writes the train manifest there, also on failure.
pub fn train_run(cfg: &RunConfig, data: &Dataset, argv: &[String]) -> Result<trainer::TrainOutcome> {
    let dir = cfg.run_dir();
    create_dir(&dir)?;
    write(&dir.join(CONFIG_FILE), cfg.to_json()?)?;
    log::info!("training run {} ({:?}, T={}) in {}", cfg.run_id(), cfg.mode, cfg.diffusion_steps, dir.display());
    let result = trainer::train(&cfg.model_config(), &cfg.train_config(Some(dir.clone())), data);
    let mut files: Vec<PathBuf> = [CONFIG_FILE, REPORT_FILE, TRAJECTORY_FILE, BEST_CHECKPOINT]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    files.extend(list_checkpoints(&dir)?.into_iter().map(|(_, p)| p));
    let manifest = Manifest::new("train", cfg, argv);
    match result {
        Ok(outcome) => {
            manifest.write(&dir, &files)?;
            if let (Some(e), Some(p)) = (outcome.report.best_epoch, outcome.report.best_valid_perplexity) {
                log::info!("best validation perplexity {p:.3} at epoch {e}");
            }
            Ok(outcome)
        }
        Err(e) => {
            manifest.failed(&e).write(&dir, &files)?;
            Err(e)
        }
    }
}

pub fn train(cfg: &RunConfig, argv: &[String]) -> Result<TrainReport> {
    let data = load_corpus(cfg)?;
    Ok(train_run(cfg, &data, argv)?.report)
}

/// Scores a checkpoint on `eval_split`; outputs go next to the checkpoint.
pub fn eval_checkpoint(cfg: &RunConfig, data: &Dataset, ckpt_path: &Path, argv: &[String]) -> Result<MetricsReport> {
    let ckpt = load_matching_checkpoint(ckpt_path, data)?;
    let ckpt_id = Artifact::hash(ckpt_path, Path::new(""))?.sha256[..12].to_string();
    let heldout = data.split(cfg.eval_split);
    let (report, beta) = evaluate_model(&ckpt.model, &data.train, heldout, &data.vocab.fingerprint(), &ckpt_id)?;
    log::info!(
        "{}: coherence {:.4}, diversity {:.4}, quality {:.4}, perplexity {:.3}",
        cfg.eval_split.name(),
        report.coherence,
        report.diversity,
        report.quality,
        report.perplexity
    );
    let dir = parent_dir(ckpt_path);
    let metrics_path = dir.join(metrics_file(cfg.eval_split));
    write(&metrics_path, serde_json::to_string_pretty(&report)?)?;
    let tsv_path = dir.join(TOP_WORDS_FILE);
    write(&tsv_path, top_words_tsv(&beta, &top_words(&beta, cfg.top_n), &data.vocab))?;
    Manifest::new("eval", cfg, argv).write(&dir, &[metrics_path, tsv_path])?;
    Ok(report)
}

pub fn eval(cfg: &RunConfig, argv: &[String]) -> Result<MetricsReport> {
    let ckpt = checkpoint_path(cfg)?;
    let data = load_corpus(cfg)?;
    eval_checkpoint(cfg, &data, &ckpt, argv)
}

/// Writes the `top_n` words of every topic and returns them as text lines.
pub fn topics(cfg: &RunConfig, argv: &[String]) -> Result<Vec<String>> {
    let ckpt_path = checkpoint_path(cfg)?;
    let data = load_corpus(cfg)?;
    let ckpt = load_matching_checkpoint(&ckpt_path, &data)?;
    let beta = ckpt.model.topic_word()?;
    let top = top_words(&beta, cfg.top_n);
    let lines: Vec<String> = top
        .topics
        .iter()
        .enumerate()
        .map(|(k, words)| {
            let toks: Vec<&str> = words.iter().map(|&w| data.vocab.token(w).unwrap_or("<unk>")).collect();
            format!("{k}\t{}", toks.join(" "))
        })
        .collect();
    let dir = parent_dir(&ckpt_path);
    let path = dir.join(TOPICS_FILE);
    write(&path, top_words_tsv(&beta, &top, &data.vocab))?;
    Manifest::new("topics", cfg, argv).write(&dir, &[path])?;
    Ok(lines)
}

/// One row of the diffusion-step sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub steps: usize,
    pub result: std::result::Result<MetricsReport, String>,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        match &self.result {
            Ok(r) => format!(
                "{},{},{},{},{},ok",
                self.steps, r.coherence, r.diversity, r.quality, r.perplexity
            ),
            Err(e) => format!("{},,,,,error: {}", self.steps, e.replace([',', '\n'], ";")),
        }
    }
}

pub fn sweep_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.join(format!("sweep-{}", cfg.run_id()))
}

/// Trains one model per `t_values` entry, evaluates its best checkpoint on
/// the test split, and writes `sweep_t.csv`. Failed rows do not stop the sweep.
pub fn sweep_t(cfg: &RunConfig, argv: &[String]) -> Result<Vec<SweepRow>> {
    let data = load_corpus(cfg)?;
    let mut rows = Vec::with_capacity(cfg.t_values.len());
    for &steps in &cfg.t_values {
        let run = RunConfig {
            diffusion_steps: steps,
            eval_split: Split::Test,
            checkpoint: None,
            ..cfg.clone()
        };
        let result = run
            .validate()
            .and_then(|_| train_run(&run, &data, argv))
            .and_then(|_| eval_checkpoint(&run, &data, &run.run_dir().join(BEST_CHECKPOINT), argv))
            .map_err(|e| e.to_string());
        if let Err(e) = &result {
            log::warn!("sweep T={steps} failed: {e}");
        }
        rows.push(SweepRow { steps, result });
    }

    let dir = sweep_dir(cfg);
    create_dir(&dir)?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    for r in &rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    let path = dir.join(SWEEP_FILE);
    write(&path, csv)?;
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    let mut manifest = Manifest::new("sweep-t", cfg, argv);
    if failed > 0 {
        manifest.status = Status::Partial;
        manifest.error = Some(format!("{failed} of {} runs failed", rows.len()));
    }
    manifest.write(&dir, std::slice::from_ref(&path))?;
    if failed > 0 {
        return Err(Error::SweepIncomplete {
            failed,
            total: rows.len(),
            path,
        });
    }
    Ok(rows)
}

/// Test-set KL and perplexity at every retained checkpoint of a run,
/// filtered to the strictly improving ones.
pub fn kl_test(cfg: &RunConfig, argv: &[String]) -> Result<KlTrajectory> {
    let dir = cfg.require_path("out", Some(&cfg.run_dir()))?;
    let data = load_corpus(cfg)?;
    let ckpts = list_checkpoints(&dir)?;
    if ckpts.is_empty() {
        return Err(Error::InvalidConfig(format!("no checkpoints in {}", dir.display())));
    }
    if cfg.max_checkpoints.is_some() {
        log::warn!("max_checkpoints is set, so only the latest improving checkpoints were kept");
    }
    let mut points = Vec::with_capacity(ckpts.len());
    for (epoch, path) in &ckpts {
        let ckpt = load_matching_checkpoint(path, &data)?;
        let e = evaluate_split(&ckpt.model, &data.test, cfg.batch_size)?;
        points.push(KlPoint {
            epoch: *epoch,
            kl: e.mean_kl(),
            perplexity: e.perplexity(),
        });
    }
    let trajectory = KlTrajectory::from_points(points);
    let path = dir.join(KL_TEST_FILE);
    write(&path, trajectory.to_csv())?;
    Manifest::new("kl-test", cfg, argv).write(&dir, &[path])?;
    Ok(trajectory)
}

/// Writes a synthetic corpus drawn from an LDA-style generative model.
pub fn synth(cfg: &RunConfig, spec: &SyntheticSpec, output: &Path, argv: &[String]) -> Result<PathBuf> {
    let lines = generate_lines(spec)?;
    let dir = parent_dir(output);
    create_dir(&dir)?;
    write(output, lines.join("\n") + "\n")?;
    Manifest::new("synth", cfg, argv).write(&dir, &[output.to_path_buf()])?;
    Ok(output.to_path_buf())
}
