//! Central finite-difference gradient checking.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    /// Central-difference half step.
    pub step: f64,
    /// Coordinates checked per parameter; all of them if the parameter is smaller.
    pub max_coords: usize,
    pub seed: u64,
    /// Floor on the relative-error denominator. Raise it above the
    /// round-off level of the difference quotient for losses with large
    /// magnitude, where tiny gradients are otherwise pure noise.
    pub min_scale: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_coords: 64,
            seed: 0,
            min_scale: 1e-8,
        }
    }
}

/// Compares the tape gradient of `loss` with respect to `name` against
/// central differences at the current point of `store`, returning the
/// largest relative error over the sampled coordinates.
///
/// `loss` must be deterministic: any noise it uses has to be frozen.
pub fn finite_diff_check<F>(store: &ParamStore, name: &str, loss: F, opts: &GradCheckOptions) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let analytic = {
        let mut work = store.clone();
        work.zero_grads();
        let mut tape = Tape::new();
        let out = loss(&mut tape, &work)?;
        tape.backward(out, &mut work)?;
        work.grad(name)?.clone()
    };

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = loss(&mut tape, s)?;
        let v = tape.value(out);
        v.item().ok_or(Error::NotScalar {
            rows: v.rows(),
            cols: v.cols(),
        })
    };

    let n = analytic.len();
    let coords: Vec<usize> = if n <= opts.max_coords {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut picked = index::sample(&mut rng, n, opts.max_coords).into_vec();
        picked.sort_unstable();
        picked
    };

    let mut probe = store.clone();
    let mut worst: f64 = 0.0;
    for i in coords {
        let orig = probe.value(name)?.data()[i];
        probe.value_mut(name)?.data_mut()[i] = orig + opts.step;
        let plus = eval(&probe)?;
        probe.value_mut(name)?.data_mut()[i] = orig - opts.step;
        let minus = eval(&probe)?;
        probe.value_mut(name)?.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * opts.step);
        let (a, num) = (analytic.data()[i], numeric);
        worst = worst.max((a - num).abs() / (a.abs() + num.abs()).max(opts.min_scale));
    }
    Ok(worst)
}
