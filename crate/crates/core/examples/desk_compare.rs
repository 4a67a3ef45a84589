//! Trains the three latent modes on one synthetic corpus and prints their
//! best validation perplexities.
//!
//! Usage: desk_compare [docs] [vocab] [hidden] [epochs] [lr] [seed] [batch]

use std::time::Instant;

use diffetm::corpus::{ingest, IngestOptions, RawCorpus};
use diffetm::model::{Mode, ModelConfig};
use diffetm::synth::{generate_lines, SyntheticSpec};
use diffetm::trainer::{train, TrainConfig};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> diffetm::Result<()> {
    env_logger::init();
    let docs: usize = arg(1, 12_000);
    let vocab: usize = arg(2, 2_000);
    let hidden: usize = arg(3, 128);
    let epochs: usize = arg(4, 50);
    let lr: f64 = arg(5, 0.008);
    let seed: u64 = arg(6, 0);
    let batch: usize = arg(7, 1000);
    let spec = SyntheticSpec {
        num_docs: docs,
        vocab_size: vocab,
        num_topics: 50,
        mean_doc_len: 80.0,
        seed,
        ..Default::default()
    };
    let lines = generate_lines(&spec)?;
    let (data, report) = ingest(
        &RawCorpus::Pooled(lines),
        &IngestOptions {
            min_df: 5,
            fractions: [0.85, 0.05, 0.10],
            seed,
            ..Default::default()
        },
    )?;
    println!("{report:?}");
    for mode in [Mode::Diffusion, Mode::StandardEtm, Mode::NoDiffusion] {
        let mc = ModelConfig {
            num_topics: 50,
            hidden_dim: hidden,
            mode,
            seed,
            ..Default::default()
        };
        let tc = TrainConfig {
            epochs,
            batch_size: batch,
            learning_rate: lr,
            ..Default::default()
        };
        let t = Instant::now();
        let out = train(&mc, &tc, &data)?;
        let ppl: Vec<String> = out
            .report
            .epochs
            .iter()
            .step_by((epochs / 10).max(1))
            .map(|e| format!("{:.0}", e.valid_perplexity.unwrap_or(f64::NAN)))
            .collect();
        println!(
            "{mode:>13}: best ppl {:.2} @ {:?} | {:.1}s | traj {} | kl {:.2}",
            out.report.best_valid_perplexity.unwrap(),
            out.report.best_epoch,
            t.elapsed().as_secs_f64(),
            ppl.join(" "),
            out.report.epochs.last().unwrap().train_kl,
        );
    }
    Ok(())
}
