use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Heat-source command: normalized energy density, beam radius (m) and
/// source depth (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub ned: f64,
    pub radius: f64,
    pub depth: f64,
}

impl Command {
    pub fn as_array(&self) -> [f64; 3] {
        [self.ned, self.radius, self.depth]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Command { ned: a[0], radius: a[1], depth: a[2] }
    }
}

/// Observations `o_0..o_N` (W, D in m) and the commands `u_1..u_N`, where
/// `o_i` is the response to `u_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlTrace {
    pub observations: Vec<[f64; 2]>,
    pub commands: Vec<Command>,
}

impl ControlTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,W,D,NED,r_b,d\n");
        for (i, o) in self.observations.iter().enumerate() {
            match i.checked_sub(1).and_then(|c| self.commands.get(c)) {
                Some(c) => out.push_str(&format!("{i},{},{},{},{},{}\n", o[0], o[1], c.ned, c.radius, c.depth)),
                None => out.push_str(&format!("{i},{},{},,,\n", o[0], o[1])),
            }
        }
        out
    }
}

/// Per-feature min-max scaling; constant features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl MinMax {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for r in rows {
            for (j, v) in r.iter().enumerate() {
                lo[j] = lo[j].min(*v);
                hi[j] = hi[j].max(*v);
            }
        }
        Ok(MinMax { lo, hi })
    }

    fn span(&self, j: usize) -> f64 {
        let s = self.hi[j] - self.lo[j];
        if s > 0.0 { s } else { 1.0 }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(j, v)| (v - self.lo[j]) / self.span(j)).collect()
    }

    pub fn denormalize(&self, y: &[f64]) -> Vec<f64> {
        y.iter().enumerate().map(|(j, v)| self.lo[j] + v * self.span(j)).collect()
    }
}

/// Raw input and target rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rows {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Rows {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn push(&mut self, x: Vec<f64>, t: Vec<f64>) {
        self.inputs.push(x);
        self.targets.push(t);
    }
}

/// Sliding-window rows with train/validation/test splits and train-only
/// normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub window: usize,
    pub train: Rows,
    pub val: Rows,
    pub test: Rows,
    pub input_norm: MinMax,
    pub target_norm: MinMax,
    /// Traces dropped for being shorter than `window + 1` observations.
    pub skipped: usize,
}

/// Row for observation `i ≥ 1`: `o_{i−1}, …, o_{i−k}` (padded with `o_0`)
/// followed by the expected `o_i`.
pub fn window_row(history: &[[f64; 2]], k: usize, expected: [f64; 2]) -> Vec<f64> {
    let mut row = Vec::with_capacity(2 * k + 2);
    let n = history.len();
    for lag in 1..=k {
        let o = if lag <= n { history[n - lag] } else { history[0] };
        row.extend_from_slice(&o);
    }
    row.extend_from_slice(&expected);
    row
}

/// Fractions of rows going to training and validation; the rest is test.
pub const SPLIT: (f64, f64) = (0.7, 0.2);

pub fn build_dataset(traces: &[ControlTrace], k: usize, seed: u64) -> Result<WindowedDataset> {
    if k == 0 {
        return Err(Error::InvalidInput("window must be at least 1".into()));
    }
    let mut all = Rows::default();
    let mut skipped = 0;
    for tr in traces {
        if tr.observations.len() < k + 1 || tr.commands.len() + 1 != tr.observations.len() {
            skipped += 1;
            continue;
        }
        for i in 1..tr.observations.len() {
            all.push(window_row(&tr.observations[..i], k, tr.observations[i]), tr.commands[i - 1].as_array().to_vec());
        }
    }
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} traces shorter than {} observations", k + 1);
    }
    if all.len() < 10 {
        return Err(Error::InsufficientData { needed: 10, got: all.len() });
    }
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (SPLIT.0 * all.len() as f64).round() as usize;
    let n_val = (SPLIT.1 * all.len() as f64).round() as usize;
    let take = |ids: &[usize]| {
        let mut r = Rows::default();
        for &i in ids {
            r.push(all.inputs[i].clone(), all.targets[i].clone());
        }
        r
    };
    let raw_train = take(&order[..n_train]);
    let input_norm = MinMax::fit(&raw_train.inputs)?;
    let target_norm = MinMax::fit(&raw_train.targets)?;
    let norm = |r: Rows| Rows {
        inputs: r.inputs.iter().map(|x| input_norm.normalize(x)).collect(),
        targets: r.targets.iter().map(|t| target_norm.normalize(t)).collect(),
    };
    Ok(WindowedDataset {
        window: k,
        train: norm(raw_train),
        val: norm(take(&order[n_train..n_train + n_val])),
        test: norm(take(&order[n_train + n_val..])),
        input_norm,
        target_norm,
        skipped,
    })
}
