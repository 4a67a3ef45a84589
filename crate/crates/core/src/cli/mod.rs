//! The `diffetm` command line: argument parsing and dispatch.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::Value;

pub use config::{preset, Overrides, RunConfig, PRESETS};
pub use manifest::{Artifact, Manifest, Status};

use crate::corpus::Split;
use crate::error::Result;
use crate::model::Mode;
use crate::synth::SyntheticSpec;

#[derive(Debug, Parser)]
#[command(name = "diffetm", version, about = "Diffusion-enhanced embedded topic model")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output root.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Named settings, layered under the config file.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
    /// Leave wall-clock times out of reports.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the vocabulary and the binary corpus cache.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        min_df: Option<usize>,
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
    },
    /// Train one model under out/<run_id>.
    Train {
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        diffusion_steps: Option<usize>,
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
    },
    /// Coherence, diversity, quality and perplexity of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        split: Option<Split>,
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
    },
    /// Top words per topic.
    Topics {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        top_n: Option<usize>,
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
    },
    /// Train and evaluate one model per diffusion step count.
    SweepT {
        #[arg(long, value_delimiter = ',')]
        t_values: Option<Vec<usize>>,
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
    },
    /// Test-set KL at each retained checkpoint of a run.
    KlTest {
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
    },
    /// Write a synthetic corpus, one document per line.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 12000)]
        docs: usize,
        #[arg(long, default_value_t = 2000)]
        vocab: usize,
        #[arg(long, default_value_t = 20)]
        topics: usize,
        #[arg(long, default_value_t = 80.0)]
        doc_len: f64,
    },
}

fn push<T: serde::Serialize>(keys: &mut Vec<(String, Value)>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        keys.push((key.into(), serde_json::to_value(v).expect("flag value serializes")));
    }
}

impl Cli {
    fn overrides(&self) -> Overrides {
        let mut keys = Vec::new();
        match &self.command {
            Command::Ingest { input, min_df, corpus_dir } => {
                push(&mut keys, "input", input.as_ref());
                push(&mut keys, "min_df", *min_df);
                push(&mut keys, "corpus_dir", corpus_dir.as_ref());
            }
            Command::Train { mode, epochs, diffusion_steps, corpus_dir } => {
                push(&mut keys, "mode", *mode);
                push(&mut keys, "epochs", *epochs);
                push(&mut keys, "diffusion_steps", *diffusion_steps);
                push(&mut keys, "corpus_dir", corpus_dir.as_ref());
            }
            Command::Eval { checkpoint, split, corpus_dir } => {
                push(&mut keys, "checkpoint", checkpoint.as_ref());
                push(&mut keys, "eval_split", *split);
                push(&mut keys, "corpus_dir", corpus_dir.as_ref());
            }
            Command::Topics { checkpoint, top_n, corpus_dir } => {
                push(&mut keys, "checkpoint", checkpoint.as_ref());
                push(&mut keys, "top_n", *top_n);
                push(&mut keys, "corpus_dir", corpus_dir.as_ref());
            }
            Command::SweepT { t_values, corpus_dir } => {
                push(&mut keys, "t_values", t_values.as_ref());
                push(&mut keys, "corpus_dir", corpus_dir.as_ref());
            }
            Command::KlTest { corpus_dir } => push(&mut keys, "corpus_dir", corpus_dir.as_ref()),
            Command::Synth { .. } => {}
        }
        Overrides {
            preset: self.preset.clone(),
            seed: self.seed,
            out: self.out.clone(),
            deterministic: self.deterministic,
            keys,
        }
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        RunConfig::resolve(self.config.as_deref(), &self.overrides())
    }
}

/// Resolves the configuration and runs the command. `argv` is recorded in
/// the manifest.
pub fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    let cfg = cli.resolve()?;
    log::info!("effective config (run {}):\n{}", cfg.run_id(), cfg.to_json()?);
    match &cli.command {
        Command::Ingest { .. } => {
            commands::ingest(&cfg, argv)?;
        }
        Command::Train { .. } => {
            commands::train(&cfg, argv)?;
        }
        Command::Eval { .. } => {
            let r = commands::eval(&cfg, argv)?;
            println!(
                "coherence\t{}\ndiversity\t{}\nquality\t{}\nperplexity\t{}",
                r.coherence, r.diversity, r.quality, r.perplexity
            );
        }
        Command::Topics { .. } => {
            for line in commands::topics(&cfg, argv)? {
                println!("{line}");
            }
        }
        Command::SweepT { .. } => {
            let rows = commands::sweep_t(&cfg, argv)?;
            println!("{}", commands::SWEEP_HEADER);
            for r in &rows {
                println!("{}", r.to_csv());
            }
        }
        Command::KlTest { .. } => print!("{}", commands::kl_test(&cfg, argv)?.to_csv()),
        Command::Synth { output, docs, vocab, topics, doc_len } => {
            let spec = SyntheticSpec {
                num_docs: *docs,
                vocab_size: *vocab,
                num_topics: *topics,
                mean_doc_len: *doc_len,
                seed: cfg.seed,
                ..Default::default()
            };
            commands::synth(&cfg, &spec, output, argv)?;
        }
    }
    Ok(())
}

/// Parses `argv` and runs it.
pub fn run_args<I, S>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&argv).map_err(|e| crate::Error::Config {
        key: "<args>".into(),
        detail: e.to_string(),
    })?;
    run(&cli, &argv)
}
