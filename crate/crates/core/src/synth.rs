//! Synthetic corpora drawn from an LDA-style generative process, for
//! smoke runs and desk-scale experiments when no real corpus is at hand.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub num_docs: usize,
    pub vocab_size: usize,
    pub num_topics: usize,
    pub mean_doc_len: f64,
    /// Symmetric Dirichlet concentration of per-document topic mixtures.
    pub doc_topic_concentration: f64,
    /// Symmetric Dirichlet concentration of topic-word distributions.
    pub topic_word_concentration: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_docs: 1000,
            vocab_size: 500,
            num_topics: 20,
            mean_doc_len: 60.0,
            doc_topic_concentration: 0.1,
            topic_word_concentration: 0.05,
            seed: 0,
        }
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, dim: usize, concentration: f64) -> Result<Vec<f64>> {
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::InvalidConfig(format!("bad Dirichlet concentration {concentration}: {e}")))?;
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return Ok(draws.into_iter().map(|x| x / total).collect());
        }
    }
}

/// Token spelling of synthetic word `id`.
pub fn word(id: usize) -> String {
    format!("w{id:05}")
}

/// One space-separated line per document.
pub fn generate_lines(spec: &SyntheticSpec) -> Result<Vec<String>> {
    if spec.num_topics == 0 || spec.vocab_size == 0 || !(spec.mean_doc_len > 0.0) {
        return Err(Error::InvalidConfig(format!("degenerate synthetic spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let topics: Vec<WeightedIndex<f64>> = (0..spec.num_topics)
        .map(|_| {
            let phi = dirichlet(&mut rng, spec.vocab_size, spec.topic_word_concentration)?;
            WeightedIndex::new(phi).map_err(|e| Error::InvalidConfig(e.to_string()))
        })
        .collect::<Result<_>>()?;
    let len_dist = Poisson::new(spec.mean_doc_len).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut lines = Vec::with_capacity(spec.num_docs);
    for _ in 0..spec.num_docs {
        let theta = dirichlet(&mut rng, spec.num_topics, spec.doc_topic_concentration)?;
        let mix = WeightedIndex::new(theta).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let len = (len_dist.sample(&mut rng) as usize).max(1);
        let tokens: Vec<String> = (0..len)
            .map(|_| word(topics[mix.sample(&mut rng)].sample(&mut rng)))
            .collect();
        lines.push(tokens.join(" "));
    }
    Ok(lines)
}
