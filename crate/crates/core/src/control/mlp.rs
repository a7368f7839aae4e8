use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feed-forward net: rectifier hidden layers, logistic outputs.
///
/// Parameters are one flat vector; layer `l` stores its weights row-major
/// (`out × in`) followed by its biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, width: usize, output: usize) -> Result<Self> {
        if input == 0 || width == 0 || output == 0 {
            return Err(Error::InvalidInput("layer sizes must be positive".into()));
        }
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(width, hidden));
        sizes.push(output);
        let n = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(Mlp { sizes, params: vec![0.0; n] })
    }

    /// He-normal weights, zero biases.
    pub fn init(input: usize, hidden: usize, width: usize, output: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut m = Self::zeros(input, hidden, width, output)?;
        let mut off = 0;
        for w in m.sizes.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            for p in &mut m.params[off..off + fan_in * fan_out] {
                *p = normal.sample(rng);
            }
            off += fan_out * (fan_in + 1);
        }
        Ok(m)
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn validate(&self) -> Result<()> {
        let n: usize = self.sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        if self.sizes.len() < 2 || n != self.params.len() || self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("network parameters do not match its layer sizes".into()));
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let last = self.sizes.len() - 2;
        let mut acts = vec![x.to_vec()];
        let mut off = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let (wts, bias) = self.params[off..off + n_out * (n_in + 1)].split_at(n_out * n_in);
            let a = acts.last().expect("input layer");
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &wts[o * n_in..(o + 1) * n_in];
                    let s = bias[o] + row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>();
                    if l == last { logistic(s) } else { s.max(0.0) }
                })
                .collect();
            acts.push(z);
            off += n_out * (n_in + 1);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_inputs() {
            return Err(Error::InvalidInput(format!("expected {} inputs, got {}", self.n_inputs(), x.len())));
        }
        Ok(self.activations(x).pop().expect("output layer"))
    }

    /// Summed squared error of one row, accumulating its gradient into
    /// `grad`.
    pub(crate) fn backprop(&self, x: &[f64], target: &[f64], grad: &mut [f64]) -> f64 {
        let acts = self.activations(x);
        let out = acts.last().expect("output layer");
        let loss = out.iter().zip(target).map(|(y, t)| (y - t).powi(2)).sum();
        // dL/dz at the output through the logistic.
        let mut delta: Vec<f64> = out.iter().zip(target).map(|(y, t)| 2.0 * (y - t) * y * (1.0 - y)).collect();
        let mut off = self.params.len();
        for l in (0..self.sizes.len() - 1).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            off -= n_out * (n_in + 1);
            let a = &acts[l];
            let (gw, gb) = grad[off..off + n_out * (n_in + 1)].split_at_mut(n_out * n_in);
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(a) {
                    *g += d * x;
                }
            }
            if l == 0 {
                break;
            }
            let wts = &self.params[off..off + n_out * n_in];
            delta = (0..n_in)
                .map(|i| {
                    if a[i] <= 0.0 {
                        0.0
                    } else {
                        (0..n_out).map(|o| wts[o * n_in + i] * delta[o]).sum()
                    }
                })
                .collect();
        }
        loss
    }

    /// Mean summed squared error over rows and its gradient.
    pub fn loss_and_grad(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            loss += self.backprop(x, t, &mut grad);
        }
        let n = inputs.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
        let n = inputs.len().max(1) as f64;
        inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                let y = self.activations(x).pop().expect("output layer");
                y.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / n
    }
}

/// Largest relative difference between the analytic gradient and central
/// differences over `probes` randomly chosen parameters.
pub fn gradient_check(
    net: &Mlp,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    probes: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let (_, grad) = net.loss_and_grad(inputs, targets);
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for _ in 0..probes {
        let i = rng.random_range(0..net.params.len());
        let h = 1e-6 * net.params[i].abs().max(1e-2);
        probe.params[i] = net.params[i] + h;
        let up = probe.loss(inputs, targets);
        probe.params[i] = net.params[i] - h;
        let down = probe.loss(inputs, targets);
        probe.params[i] = net.params[i];
        let numeric = (up - down) / (2.0 * h);
        let scale = grad[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((grad[i] - numeric).abs() / scale);
    }
    worst
}
