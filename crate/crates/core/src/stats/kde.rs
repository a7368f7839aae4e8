use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb, `0.9·min(σ̂, IQR/1.35)·n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("samples must be finite".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let mut spread = var.sqrt().min(iqr / 1.35);
    if spread <= 0.0 {
        let range = sorted[n - 1] - sorted[0];
        spread = if range > 0.0 { 1e-3 * range } else { 1e-12 };
    }
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// One-dimensional Gaussian KDE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    pub samples: Vec<f64>,
    pub bandwidth: f64,
}

impl KdeModel {
    /// Model with the Silverman bandwidth.
    pub fn fit(samples: Vec<f64>) -> Result<Self> {
        let bandwidth = silverman_bandwidth(&samples)?;
        Ok(KdeModel { samples, bandwidth })
    }

    pub fn with_bandwidth(samples: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: samples.len() });
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(KdeModel { samples, bandwidth })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        kde_pdf(self, x)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Density at every node of a uniform grid.
    ///
    /// Each kernel is expanded outward from its nearest node with the
    /// Gaussian ratio recurrence and truncated once it falls below 1e-17 of
    /// its peak, so the cost is linear in the support width.
    pub fn pdf_on_grid(&self, grid: &UniformGrid) -> Vec<f64> {
        let mut out = vec![0.0; grid.n];
        let h = self.bandwidth;
        let step = grid.step();
        let a = step / h;
        let decay = (-a * a).exp();
        let norm = INV_SQRT_2PI / (self.samples.len() as f64 * h);
        let last = grid.n as isize - 1;
        for &s in &self.samples {
            let pos = ((s - grid.lo) / step).round().clamp(-1.0, (last + 1) as f64) as isize;
            let u0 = (grid.lo + pos as f64 * step - s) / h;
            let k0 = (-0.5 * u0 * u0).exp();
            if (0..=last).contains(&pos) {
                out[pos as usize] += k0;
            }
            // Upward.
            let (mut k, mut r) = (k0, (-u0 * a - 0.5 * a * a).exp());
            let mut i = pos + 1;
            while i <= last {
                k *= r;
                r *= decay;
                if k < 1e-17 {
                    break;
                }
                if i >= 0 {
                    out[i as usize] += k;
                }
                i += 1;
            }
            // Downward.
            let (mut k, mut r) = (k0, (u0 * a - 0.5 * a * a).exp());
            let mut i = pos - 1;
            while i >= 0 {
                k *= r;
                r *= decay;
                if k < 1e-17 {
                    break;
                }
                if i <= last {
                    out[i as usize] += k;
                }
                i -= 1;
            }
        }
        out.iter_mut().for_each(|v| *v *= norm);
        out
    }
}

/// Kernel density estimate at `x`; strictly positive for finite `x` near
/// the data.
pub fn kde_pdf(model: &KdeModel, x: f64) -> f64 {
    let h = model.bandwidth;
    let sum: f64 = model
        .samples
        .iter()
        .map(|s| {
            let u = (x - s) / h;
            (-0.5 * u * u).exp()
        })
        .sum();
    sum / ((2.0 * PI).sqrt() * model.samples.len() as f64 * h)
}

/// `n` equally spaced nodes over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl UniformGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(n >= 2 && hi > lo && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid grid [{lo}, {hi}] with {n} nodes")));
        }
        Ok(UniformGrid { lo, hi, n })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Trapezoid rule for values sampled on the nodes.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        let n = values.len();
        let inner: f64 = values[1..n - 1].iter().sum();
        self.step() * (inner + 0.5 * (values[0] + values[n - 1]))
    }
}
