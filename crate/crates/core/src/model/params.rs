//! Parameter layout and initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::Result;
use crate::gradcore::{ParamStore, Tape, Tensor2D, Var};

pub const TOPIC_EMBEDDINGS: &str = "topic_embeddings";
pub const WORD_EMBEDDINGS: &str = "word_embeddings";

/// The three-layer feed-forward networks of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Network {
    /// Produces X0 for the diffusion module.
    DiffusionEncoder,
    Mu,
    LogVar,
}

impl Network {
    pub const ALL: [Network; 3] = [Network::DiffusionEncoder, Network::Mu, Network::LogVar];

    pub fn prefix(self) -> &'static str {
        match self {
            Network::DiffusionEncoder => "diffusion_encoder",
            Network::Mu => "mu_net",
            Network::LogVar => "logvar_net",
        }
    }

    pub fn weight(self, layer: usize) -> String {
        format!("{}.{layer}.weight", self.prefix())
    }

    pub fn bias(self, layer: usize) -> String {
        format!("{}.{layer}.bias", self.prefix())
    }

    /// `affine → relu → affine → relu → affine`.
    pub fn record(self, tape: &mut Tape, store: &ParamStore, input: Var) -> Result<Var> {
        let mut h = input;
        for layer in 0..3 {
            let w = tape.param(store, &self.weight(layer))?;
            let b = tape.param(store, &self.bias(layer))?;
            h = tape.affine(h, w, b)?;
            if layer < 2 {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Tensor2D {
    Tensor2D::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

/// Builds every parameter with fan-in scaled uniform draws `U(±1/√fan_in)`.
///
/// The diffusion encoder's output width equals the topic count so X0 and
/// the reparameterization noise share a shape.
pub fn init_params(config: &ModelConfig, vocab_size: usize) -> Result<ParamStore> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (v, h, k, e) = (vocab_size, config.hidden_dim, config.num_topics, config.embed_dim);
    let mut store = ParamStore::new();
    for net in Network::ALL {
        for (layer, (fan_in, fan_out)) in [(v, h), (h, h), (h, k)].into_iter().enumerate() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            store.insert(net.weight(layer), uniform(&mut rng, fan_in, fan_out, bound))?;
            store.insert(net.bias(layer), uniform(&mut rng, 1, fan_out, bound))?;
        }
    }
    let bound = 1.0 / (e as f64).sqrt();
    store.insert(TOPIC_EMBEDDINGS, uniform(&mut rng, k, e, bound))?;
    store.insert(WORD_EMBEDDINGS, uniform(&mut rng, v, e, bound))?;
    Ok(store)
}

/// Parameter names in store order.
pub fn param_names(store: &ParamStore) -> Vec<String> {
    store.names().map(str::to_owned).collect()
}
