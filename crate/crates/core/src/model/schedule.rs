use crate::error::{Error, Result};

/// Linear forward-diffusion noise schedule.
///
/// `betas[t-1]` holds β_t for t = 1..=T, ramping linearly from `beta_start`
/// (at t = 1) to `beta_end` (at t = T). `alpha_bars` is the running product
/// of α_t = 1 − β_t.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if !(beta_end < 1.0) {
            return Err(Error::InvalidSchedule(format!("beta_end must be < 1, got {beta_end}")));
        }
        if !(beta_start >= 0.0) || beta_start > beta_end {
            return Err(Error::InvalidSchedule(format!(
                "need 0 <= beta_start <= beta_end, got {beta_start} and {beta_end}"
            )));
        }
        let betas: Vec<f64> = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + i as f64 / (steps - 1) as f64 * (beta_end - beta_start)
                }
            })
            .collect();
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// ᾱ_T; 1 for an empty schedule.
    pub fn final_alpha_bar(&self) -> f64 {
        self.alpha_bars.last().copied().unwrap_or(1.0)
    }
}
