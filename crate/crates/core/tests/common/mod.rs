#![allow(dead_code)]

use diffetm::corpus::{ingest, BowCorpus, Dataset, IngestOptions, RawCorpus};
use diffetm::gradcore::Tensor2D;
use diffetm::model::{DiffEtm, Mode, ModelConfig};
use diffetm::synth::{generate_lines, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor2D {
    Tensor2D::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// The small gradient-check configuration: K=5, E=8, H=16.
pub fn small_config(mode: Mode, seed: u64) -> ModelConfig {
    ModelConfig {
        num_topics: 5,
        embed_dim: 8,
        hidden_dim: 16,
        mode,
        seed,
        ..Default::default()
    }
}

/// A random batch of `n` count rows over `v` words and its normalized view.
pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, v: usize) -> (Tensor2D, Tensor2D) {
    let mut counts = Tensor2D::zeros(n, v);
    for r in 0..n {
        for _ in 0..rng.random_range(3..12) {
            let j = rng.random_range(0..v);
            counts.set(r, j, counts.get(r, j) + 1.0);
        }
    }
    let mut norm = counts.clone();
    for r in 0..n {
        let total: f64 = counts.row(r).iter().sum();
        norm.row_mut(r).iter_mut().for_each(|x| *x /= total);
    }
    (counts, norm)
}

pub fn tiny_dataset(docs: usize, vocab: usize, topics: usize, seed: u64) -> Dataset {
    let lines = generate_lines(&SyntheticSpec {
        num_docs: docs,
        vocab_size: vocab,
        num_topics: topics,
        mean_doc_len: 30.0,
        seed,
        ..Default::default()
    })
    .unwrap();
    ingest(
        &RawCorpus::Pooled(lines),
        &IngestOptions {
            min_df: 1,
            fractions: [0.6, 0.2, 0.2],
            seed,
            ..Default::default()
        },
    )
    .unwrap()
    .0
}

/// Sets every parameter whose name starts with `prefix` to zero.
pub fn zero_params(model: &mut DiffEtm, prefix: &str) {
    let names: Vec<String> = model.params.names().filter(|n| n.starts_with(prefix)).map(String::from).collect();
    for n in names {
        model.params.value_mut(&n).unwrap().fill(0.0);
    }
}

/// −Σ X log X' / Σ X over a split, by explicit scalar loops over the model's reconstruction.
pub fn naive_perplexity(counts: &Tensor2D, recon: &Tensor2D) -> f64 {
    let (mut nll, mut tokens) = (0.0, 0.0);
    for d in 0..counts.rows() {
        for j in 0..counts.cols() {
            let c = counts.get(d, j);
            if c > 0.0 {
                nll -= c * recon.get(d, j).ln();
                tokens += c;
            }
        }
    }
    (nll / tokens).exp()
}

pub fn split_counts(c: &BowCorpus) -> Tensor2D {
    let idx: Vec<usize> = (0..c.len()).collect();
    c.batch(&idx).0
}
