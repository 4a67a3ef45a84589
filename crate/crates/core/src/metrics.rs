//! Evaluation: top words, NPMI coherence, topic diversity, topic quality
//! and held-out perplexity.

use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{BowCorpus, BowDocument, Vocabulary};
use crate::error::{Error, Result};
use crate::gradcore::Tensor2D;
use crate::model::{DiffEtm, ModelConfig, Phase, RECON_FLOOR};

pub const DEFAULT_COHERENCE_WORDS: usize = 10;
pub const DEFAULT_DIVERSITY_WORDS: usize = 25;

/// Per-topic word ids in descending probability order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicTopWords {
    pub topics: Vec<Vec<usize>>,
}

impl TopicTopWords {
    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    /// The first `n` words of every topic.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            topics: self.topics.iter().map(|t| t[..n.min(t.len())].to_vec()).collect(),
        }
    }
}

/// Sorts every row of `beta` descending, ties by ascending id, and keeps `min(n, V)`.
pub fn top_words(beta: &Tensor2D, n: usize) -> TopicTopWords {
    let topics = (0..beta.rows())
        .map(|k| {
            let row = beta.row(k);
            let mut ids: Vec<usize> = (0..row.len()).collect();
            ids.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            ids.truncate(n);
            ids
        })
        .collect();
    TopicTopWords { topics }
}

/// Document-level occurrence counts over a reference corpus.
///
/// Joint counts are kept only for pairs of tracked words.
#[derive(Clone, Debug)]
pub struct CooccurrenceStats {
    num_docs: usize,
    vocab_size: usize,
    doc_freq: Vec<u32>,
    slot: HashMap<usize, usize>,
    joint: Vec<u32>,
}

impl CooccurrenceStats {
    /// Counts over `docs`, tracking joint frequencies among `tracked` ids.
    pub fn build(docs: &[BowDocument], vocab_size: usize, tracked: &BTreeSet<usize>) -> Result<Self> {
        if let Some(&bad) = tracked.iter().find(|&&w| w >= vocab_size) {
            return Err(Error::VocabularyMismatch(format!(
                "word id {bad} outside reference vocabulary of size {vocab_size}"
            )));
        }
        let slot: HashMap<usize, usize> = tracked.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        let m = slot.len();
        let mut doc_freq = vec![0u32; vocab_size];
        let mut joint = vec![0u32; m * m];
        let mut present = Vec::new();
        for doc in docs {
            present.clear();
            for &(id, _) in doc.counts() {
                let id = id as usize;
                if id >= vocab_size {
                    return Err(Error::VocabularyMismatch(format!(
                        "reference document has word id {id} >= {vocab_size}"
                    )));
                }
                doc_freq[id] += 1;
                if let Some(&s) = slot.get(&id) {
                    present.push(s);
                }
            }
            for (i, &a) in present.iter().enumerate() {
                for &b in &present[i..] {
                    joint[a * m + b] += 1;
                    if a != b {
                        joint[b * m + a] += 1;
                    }
                }
            }
        }
        Ok(Self {
            num_docs: docs.len(),
            vocab_size,
            doc_freq,
            slot,
            joint,
        })
    }

    /// Tracks every word id appearing in `top`.
    pub fn for_topics(corpus: &BowCorpus, top: &TopicTopWords) -> Result<Self> {
        let tracked: BTreeSet<usize> = top.topics.iter().flatten().copied().collect();
        Self::build(&corpus.docs, corpus.vocab_size, &tracked)
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn doc_freq(&self, w: usize) -> Result<u32> {
        self.doc_freq
            .get(w)
            .copied()
            .ok_or_else(|| Error::VocabularyMismatch(format!("word id {w} >= {}", self.vocab_size)))
    }

    pub fn joint(&self, a: usize, b: usize) -> Result<u32> {
        let m = self.slot.len();
        match (self.slot.get(&a), self.slot.get(&b)) {
            (Some(&i), Some(&j)) => Ok(self.joint[i * m + j]),
            _ => Err(Error::VocabularyMismatch(format!(
                "pair ({a}, {b}) not tracked by these co-occurrence statistics"
            ))),
        }
    }

    /// NPMI of one pair; −1 when the words never co-occur, 0 when they occur in every document.
    pub fn npmi(&self, a: usize, b: usize) -> Result<f64> {
        let n = self.num_docs as f64;
        let joint = self.joint(a, b)?;
        if joint == 0 {
            return Ok(-1.0);
        }
        let p_ab = f64::from(joint) / n;
        if p_ab >= 1.0 {
            return Ok(0.0);
        }
        let p_a = f64::from(self.doc_freq(a)?) / n;
        let p_b = f64::from(self.doc_freq(b)?) / n;
        Ok((p_ab / (p_a * p_b)).ln() / -p_ab.ln())
    }
}

/// Mean over topics of the mean NPMI over unordered pairs of each topic's words.
pub fn npmi_coherence(top: &TopicTopWords, stats: &CooccurrenceStats) -> Result<f64> {
    if top.topics.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for words in &top.topics {
        if words.len() < 2 {
            return Err(Error::InvalidConfig("coherence needs at least 2 words per topic".into()));
        }
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for (i, &a) in words.iter().enumerate() {
            for &b in &words[i + 1..] {
                sum += stats.npmi(a, b)?;
                pairs += 1;
            }
        }
        total += sum / pairs as f64;
    }
    Ok(total / top.topics.len() as f64)
}

/// Fraction of distinct ids among all topics' lists.
pub fn topic_diversity(top: &TopicTopWords) -> f64 {
    let slots: usize = top.topics.iter().map(Vec::len).sum();
    if slots == 0 {
        return 0.0;
    }
    let distinct: BTreeSet<usize> = top.topics.iter().flatten().copied().collect();
    distinct.len() as f64 / slots as f64
}

pub fn topic_quality(coherence: f64, diversity: f64) -> f64 {
    coherence * diversity
}

/// Summed evaluation statistics over a split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitEval {
    /// −Σ_d Σ_j X_dj log X'_dj.
    pub neg_log_likelihood: f64,
    pub tokens: f64,
    /// Σ_d of the per-document closed-form KL.
    pub kl_sum: f64,
    pub docs: usize,
}

impl SplitEval {
    pub fn perplexity(&self) -> f64 {
        (self.neg_log_likelihood / self.tokens).exp()
    }

    pub fn mean_kl(&self) -> f64 {
        self.kl_sum / self.docs as f64
    }
}

/// Runs the evaluation forward pass over a split in batches.
///
/// The sampled eval path draws from a generator reseeded from the model
/// seed, so repeated evaluations agree.
pub fn evaluate_split(model: &DiffEtm, corpus: &BowCorpus, batch_size: usize) -> Result<SplitEval> {
    if corpus.vocab_size != model.vocab_size {
        return Err(Error::VocabularyMismatch(format!(
            "model has V={}, {} split has V={}",
            model.vocab_size, corpus.split, corpus.vocab_size
        )));
    }
    if corpus.is_empty() {
        return Err(Error::InvalidConfig(format!("{} split is empty", corpus.split)));
    }
    let mut rng = eval_rng(&model.config);
    let mut acc = SplitEval {
        neg_log_likelihood: 0.0,
        tokens: 0.0,
        kl_sum: 0.0,
        docs: 0,
    };
    let indices: Vec<usize> = (0..corpus.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let (counts, norm) = corpus.batch(chunk);
        let out = model.forward_batch(&counts, &norm, Phase::Eval, &mut rng)?;
        for (c, x) in counts.data().iter().zip(out.x_recon.data()) {
            if *c != 0.0 {
                acc.neg_log_likelihood -= c * x.max(RECON_FLOOR).ln();
                acc.tokens += c;
            }
        }
        acc.kl_sum += out.kl * chunk.len() as f64;
        acc.docs += chunk.len();
    }
    Ok(acc)
}

pub(crate) fn eval_rng(config: &ModelConfig) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(3);
    rng
}

/// exp of the per-token negative log-likelihood of `corpus`.
pub fn perplexity(model: &DiffEtm, corpus: &BowCorpus) -> Result<f64> {
    Ok(evaluate_split(model, corpus, 1000)?.perplexity())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub coherence: f64,
    pub diversity: f64,
    pub quality: f64,
    pub perplexity: f64,
    pub config: ModelConfig,
    pub corpus: String,
    pub checkpoint: String,
}

impl MetricsReport {
    /// `quality` is always derived from the other two fields.
    pub fn new(
        coherence: f64,
        diversity: f64,
        perplexity: f64,
        config: ModelConfig,
        corpus: impl Into<String>,
        checkpoint: impl Into<String>,
    ) -> Self {
        Self {
            coherence,
            diversity,
            quality: topic_quality(coherence, diversity),
            perplexity,
            config,
            corpus: corpus.into(),
            checkpoint: checkpoint.into(),
        }
    }
}

/// Coherence on `reference` (top-n_coh), diversity (top-n_div) and perplexity on `heldout`.
pub fn evaluate_model(
    model: &DiffEtm,
    reference: &BowCorpus,
    heldout: &BowCorpus,
    corpus_id: &str,
    checkpoint_id: &str,
) -> Result<(MetricsReport, Tensor2D)> {
    let beta = model.topic_word()?;
    let top = top_words(&beta, DEFAULT_DIVERSITY_WORDS);
    let coh_words = top.truncated(DEFAULT_COHERENCE_WORDS);
    let stats = CooccurrenceStats::for_topics(reference, &coh_words)?;
    let coherence = npmi_coherence(&coh_words, &stats)?;
    let diversity = topic_diversity(&top);
    let ppl = perplexity(model, heldout)?;
    let report = MetricsReport::new(coherence, diversity, ppl, model.config.clone(), corpus_id, checkpoint_id);
    Ok((report, beta))
}

/// TSV rows `topic_id rank token probability`.
pub fn top_words_tsv(beta: &Tensor2D, top: &TopicTopWords, vocab: &Vocabulary) -> String {
    let mut out = String::from("topic_id\trank\ttoken\tprobability\n");
    for (k, words) in top.topics.iter().enumerate() {
        for (rank, &w) in words.iter().enumerate() {
            let tok = vocab.token(w).unwrap_or("<unk>");
            out.push_str(&format!("{k}\t{rank}\t{tok}\t{:.8e}\n", beta.get(k, w)));
        }
    }
    out
}
