use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::gradcore::Tensor2D;

/// Sparse word counts of one document, sorted by word id.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BowDocument {
    counts: Vec<(u32, u32)>,
    total: u64,
}

impl BowDocument {
    /// Builds a document from `(id, count)` pairs; zero counts are ignored
    /// and repeated ids summed. Returns `None` if nothing is left.
    pub fn from_counts(pairs: impl IntoIterator<Item = (u32, u32)>) -> Option<Self> {
        let mut map: BTreeMap<u32, u32> = BTreeMap::new();
        for (id, c) in pairs {
            if c > 0 {
                *map.entry(id).or_default() += c;
            }
        }
        if map.is_empty() {
            return None;
        }
        let counts: Vec<(u32, u32)> = map.into_iter().collect();
        let total = counts.iter().map(|&(_, c)| u64::from(c)).sum();
        Some(Self { counts, total })
    }

    pub fn counts(&self) -> &[(u32, u32)] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn unique_words(&self) -> usize {
        self.counts.len()
    }

    pub fn max_id(&self) -> u32 {
        self.counts.last().map_or(0, |&(id, _)| id)
    }
}

/// Counts the in-vocabulary tokens; `None` means the document is dropped.
pub fn vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Option<BowDocument> {
    BowDocument::from_counts(
        tokens
            .iter()
            .filter_map(|t| vocab.id(t.as_ref()))
            .map(|id| (id as u32, 1)),
    )
}

/// Dense frequency vector `counts[j] / total`.
pub fn normalize(bow: &BowDocument, vocab_size: usize) -> Vec<f64> {
    let mut out = vec![0.0; vocab_size];
    let total = bow.total as f64;
    for &(id, c) in &bow.counts {
        out[id as usize] = f64::from(c) / total;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!(
                "unknown split `{other}` (expected train, valid or test)"
            ))),
        }
    }
}

/// One split of a dataset, bound to a vocabulary by size and fingerprint.
#[derive(Clone, Debug, PartialEq)]
pub struct BowCorpus {
    pub split: Split,
    pub docs: Vec<BowDocument>,
    pub vocab_size: usize,
    pub vocab_ref: String,
}

impl BowCorpus {
    pub fn new(split: Split, docs: Vec<BowDocument>, vocab_size: usize, vocab_ref: impl Into<String>) -> Result<Self> {
        if let Some(d) = docs.iter().find(|d| d.max_id() as usize >= vocab_size) {
            return Err(Error::VocabularyMismatch(format!(
                "word id {} outside vocabulary of size {vocab_size}",
                d.max_id()
            )));
        }
        Ok(Self {
            split,
            docs,
            vocab_size,
            vocab_ref: vocab_ref.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.docs.iter().map(BowDocument::total).sum()
    }

    /// Dense `(counts, normalized)` matrices for the documents at `indices`.
    pub fn batch(&self, indices: &[usize]) -> (Tensor2D, Tensor2D) {
        let v = self.vocab_size;
        let mut counts = Tensor2D::zeros(indices.len(), v);
        let mut norm = Tensor2D::zeros(indices.len(), v);
        for (r, &i) in indices.iter().enumerate() {
            let doc = &self.docs[i];
            let total = doc.total as f64;
            for &(id, c) in &doc.counts {
                counts.set(r, id as usize, f64::from(c));
                norm.set(r, id as usize, f64::from(c) / total);
            }
        }
        (counts, norm)
    }
}

/// Train, validation and test splits sharing one vocabulary.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub train: BowCorpus,
    pub valid: BowCorpus,
    pub test: BowCorpus,
}

impl Dataset {
    pub fn new(vocab: Vocabulary, train: BowCorpus, valid: BowCorpus, test: BowCorpus) -> Result<Self> {
        let fp = vocab.fingerprint();
        for c in [&train, &valid, &test] {
            if c.vocab_size != vocab.len() || c.vocab_ref != fp {
                return Err(Error::VocabularyMismatch(format!(
                    "{} split is bound to V={} ({}) but the vocabulary is V={} ({fp})",
                    c.split,
                    c.vocab_size,
                    c.vocab_ref,
                    vocab.len()
                )));
            }
        }
        Ok(Self {
            vocab,
            train,
            valid,
            test,
        })
    }

    pub fn split(&self, split: Split) -> &BowCorpus {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }
}

/// Split sizes by largest remainder: each is within 1 of `n * f`.
fn split_sizes(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| n as f64 * f).collect();
    let mut sizes = [0usize; 3];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let assigned: usize = sizes.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Seeded shuffle followed by a contiguous three-way partition.
pub fn split_corpus<T>(mut docs: Vec<T>, fractions: [f64; 3], seed: u64) -> Result<[Vec<T>; 3]> {
    if fractions.iter().any(|&f| !(f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let n = docs.len();
    let sizes = split_sizes(n, fractions);
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptySplit {
            split: Split::ALL[i].name(),
            docs: n,
            fractions,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    docs.shuffle(&mut rng);
    let test = docs.split_off(sizes[0] + sizes[1]);
    let valid = docs.split_off(sizes[0]);
    Ok([docs, valid, test])
}
