use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bow::{split_corpus, vectorize, BowCorpus, BowDocument, Dataset, Split};
use super::vocab::{tokenize_line, Vocabulary};
use crate::error::{Error, Result};

/// Raw documents, one per line.
#[derive(Clone, Debug)]
pub enum RawCorpus {
    /// A single pool that is shuffled and partitioned.
    Pooled(Vec<String>),
    /// Pre-split train/valid/test documents; no re-partitioning.
    PreSplit([Vec<String>; 3]),
}

impl RawCorpus {
    /// Reads non-blank lines from a file.
    pub fn read_lines(path: &Path) -> Result<Vec<String>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_owned)
            .collect())
    }
}

#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub min_df: usize,
    pub stopwords: HashSet<String>,
    /// Used only for [`RawCorpus::Pooled`].
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            min_df: 1,
            stopwords: HashSet::new(),
            fractions: [0.8, 0.1, 0.1],
            seed: 0,
        }
    }
}

/// Loads a stop-word list: one word per line, normalized like document tokens.
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().flat_map(tokenize_line).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub min_df: usize,
    pub vocab_size: usize,
    pub documents_read: usize,
    /// Documents left with no in-vocabulary token.
    pub documents_dropped: usize,
    pub train_docs: usize,
    pub valid_docs: usize,
    pub test_docs: usize,
    pub train_tokens: u64,
}

/// Tokenizes, prunes the vocabulary by document frequency over all
/// documents, vectorizes, drops empty documents and (for pooled input)
/// splits.
pub fn ingest(raw: &RawCorpus, opts: &IngestOptions) -> Result<(Dataset, IngestReport)> {
    let tokenize = |lines: &[String]| -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| {
                let mut toks = tokenize_line(l);
                toks.retain(|t| !opts.stopwords.contains(t));
                toks
            })
            .collect()
    };

    let (dataset, read, dropped) = match raw {
        RawCorpus::Pooled(lines) => {
            let tokens = tokenize(lines);
            let vocab = Vocabulary::build(&tokens, opts.min_df)?;
            let docs: Vec<BowDocument> = tokens.iter().filter_map(|t| vectorize(t, &vocab)).collect();
            let dropped = lines.len() - docs.len();
            let [train, valid, test] = split_corpus(docs, opts.fractions, opts.seed)?;
            (bind(vocab, [train, valid, test])?, lines.len(), dropped)
        }
        RawCorpus::PreSplit(parts) => {
            let tokens: Vec<Vec<Vec<String>>> = parts.iter().map(|p| tokenize(p)).collect();
            let all: Vec<Vec<String>> = tokens.iter().flatten().cloned().collect();
            let vocab = Vocabulary::build(&all, opts.min_df)?;
            let mut docs: Vec<Vec<BowDocument>> = tokens
                .iter()
                .map(|split| split.iter().filter_map(|t| vectorize(t, &vocab)).collect())
                .collect();
            for (split, d) in Split::ALL.iter().zip(&docs) {
                if d.is_empty() {
                    return Err(Error::EmptySplit {
                        split: split.name(),
                        docs: 0,
                        fractions: opts.fractions,
                    });
                }
            }
            let read: usize = parts.iter().map(Vec::len).sum();
            let kept: usize = docs.iter().map(Vec::len).sum();
            let test = docs.pop().expect("three splits");
            let valid = docs.pop().expect("three splits");
            let train = docs.pop().expect("three splits");
            (bind(vocab, [train, valid, test])?, read, read - kept)
        }
    };

    let report = IngestReport {
        min_df: opts.min_df,
        vocab_size: dataset.vocab_size(),
        documents_read: read,
        documents_dropped: dropped,
        train_docs: dataset.train.len(),
        valid_docs: dataset.valid.len(),
        test_docs: dataset.test.len(),
        train_tokens: dataset.train.total_tokens(),
    };
    Ok((dataset, report))
}

fn bind(vocab: Vocabulary, [train, valid, test]: [Vec<BowDocument>; 3]) -> Result<Dataset> {
    let v = vocab.len();
    let fp = vocab.fingerprint();
    Dataset::new(
        vocab,
        BowCorpus::new(Split::Train, train, v, fp.clone())?,
        BowCorpus::new(Split::Valid, valid, v, fp.clone())?,
        BowCorpus::new(Split::Test, test, v, fp)?,
    )
}
