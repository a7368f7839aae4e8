use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Post-burn-in states of a random-walk Metropolis chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub states: Vec<[f64; 3]>,
    /// Acceptance rate after burn-in.
    pub acceptance_rate: f64,
    /// Per-axis proposal standard deviation after tuning.
    pub proposal_scale: [f64; 3],
    pub seed: u64,
}

impl Chain {
    pub fn mean(&self) -> [f64; 3] {
        let n = self.states.len() as f64;
        [0, 1, 2].map(|i| self.states.iter().map(|s| s[i]).sum::<f64>() / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct ChainOptions {
    /// Fraction of steps discarded as burn-in.
    pub burn_in: f64,
    /// Adapt the proposal scale during burn-in.
    pub adapt: bool,
    pub target_acceptance: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions { burn_in: 0.2, adapt: true, target_acceptance: 0.3 }
    }
}

const ADAPT_BATCH: usize = 50;

/// Random-walk Metropolis with a Gaussian proposal of per-axis scale.
///
/// `n` counts all steps; the first `burn_in·n` are discarded. When
/// adapting, the scale is multiplied by `exp(rate − target)` after every
/// batch of 50 burn-in steps and frozen afterwards.
pub fn mh_chain<F>(
    mut log_target: F,
    init: [f64; 3],
    n: usize,
    proposal_scale: [f64; 3],
    seed: u64,
    opts: ChainOptions,
) -> Result<Chain>
where
    F: FnMut(&[f64; 3]) -> f64,
{
    if n == 0 || proposal_scale.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidInput("chain needs n > 0 and finite non-negative scales".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = init;
    let mut lx = log_target(&x);
    if !lx.is_finite() {
        return Err(Error::ChainAbort { step: 0 });
    }
    let burn = ((n as f64) * opts.burn_in).floor() as usize;
    let mut scale = proposal_scale;
    let mut states = Vec::with_capacity(n - burn);
    let (mut batch_acc, mut kept_acc) = (0usize, 0usize);
    for step in 0..n {
        let z: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let y = [x[0] + scale[0] * z[0], x[1] + scale[1] * z[1], x[2] + scale[2] * z[2]];
        let ly = log_target(&y);
        if ly.is_nan() {
            return Err(Error::ChainAbort { step: step + 1 });
        }
        let u: f64 = rng.random();
        let accept = ly >= lx || u.ln() < ly - lx;
        if accept {
            x = y;
            lx = ly;
        }
        if step < burn {
            batch_acc += usize::from(accept);
            if opts.adapt && (step + 1) % ADAPT_BATCH == 0 {
                let rate = batch_acc as f64 / ADAPT_BATCH as f64;
                let f = (rate - opts.target_acceptance).exp();
                scale.iter_mut().for_each(|s| *s *= f);
                batch_acc = 0;
            }
        } else {
            kept_acc += usize::from(accept);
            states.push(x);
        }
    }
    let kept = states.len().max(1);
    Ok(Chain { states, acceptance_rate: kept_acc as f64 / kept as f64, proposal_scale: scale, seed })
}
