use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{window_row, Command, MinMax, Rows, WindowedDataset};
use super::mlp::Mlp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub hidden_layers: usize,
    pub width: usize,
    /// Stop after this many epochs without a new best validation loss.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-4, epochs: 2450, batch: 64, seed: 7, hidden_layers: 3, width: 64, patience: None }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.batch == 0 || self.width == 0 {
            return Err(Error::InvalidInput("training settings must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub train: f64,
    pub val: f64,
}

pub fn loss_csv(curve: &[LossRow]) -> String {
    let mut out = String::from("epoch,train,val\n");
    for r in curve {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.train, r.val));
    }
    out
}

/// Trained network with everything needed to issue commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlModel {
    pub net: Mlp,
    pub window: usize,
    pub input_norm: MinMax,
    pub target_norm: MinMax,
    pub config: TrainConfig,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

impl ControlModel {
    /// Command for the expected `(W, D)` given past observations (most
    /// recent last); short histories are padded with their first entry.
    pub fn command(&self, history: &[[f64; 2]], expected: [f64; 2]) -> Result<Command> {
        if history.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let x = self.input_norm.normalize(&window_row(history, self.window, expected));
        let y = self.target_norm.denormalize(&self.net.forward(&x)?);
        Ok(Command::from_array([y[0], y[1], y[2]]))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ControlModel = serde_json::from_str(text)?;
        m.net.validate()?;
        Ok(m)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Adam on mini-batches of the summed squared error; returns the weights
/// with the best validation loss and the per-epoch loss curve.
pub fn train(ds: &WindowedDataset, config: &TrainConfig) -> Result<(ControlModel, Vec<LossRow>)> {
    config.validate()?;
    if ds.train.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_in = ds.train.inputs[0].len();
    let n_out = ds.train.targets[0].len();
    let mut net = Mlp::init(n_in, config.hidden_layers, config.width, n_out, &mut rng)?;
    let mut adam = Adam::new(net.params.len());
    let val = if ds.val.is_empty() { &ds.train } else { &ds.val };
    let mut order: Vec<usize> = (0..ds.train.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    let (mut best, mut best_val, mut best_epoch) = (net.clone(), f64::INFINITY, 0);
    let mut xb = Vec::with_capacity(config.batch);
    let mut tb = Vec::with_capacity(config.batch);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch) {
            xb.clear();
            tb.clear();
            for &i in chunk {
                xb.push(ds.train.inputs[i].clone());
                tb.push(ds.train.targets[i].clone());
            }
            let (_, grad) = net.loss_and_grad(&xb, &tb);
            adam.step(&mut net.params, &grad, config.learning_rate);
        }
        let train_loss = net.loss(&ds.train.inputs, &ds.train.targets);
        let val_loss = net.loss(&val.inputs, &val.targets);
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(Error::TrainingAbort { epoch });
        }
        curve.push(LossRow { epoch, train: train_loss, val: val_loss });
        if val_loss < best_val {
            (best, best_val, best_epoch) = (net.clone(), val_loss, epoch);
        }
        if config.patience.is_some_and(|p| epoch - best_epoch >= p) {
            break;
        }
    }
    let model = ControlModel {
        net: best,
        window: ds.window,
        input_norm: ds.input_norm.clone(),
        target_norm: ds.target_norm.clone(),
        config: config.clone(),
        best_epoch,
        epochs_run: curve.len(),
    };
    Ok((model, curve))
}

/// Relative prediction errors in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Per row: mean over the three commands of `|pred − truth| / |truth|`.
    pub errors: Vec<f64>,
    pub mean: f64,
    pub max: f64,
    /// Rows with a zero ground-truth component.
    pub excluded: usize,
}

pub fn evaluate(model: &ControlModel, rows: &Rows) -> Result<EvalReport> {
    let mut errors = Vec::with_capacity(rows.len());
    let mut excluded = 0;
    for (x, t) in rows.inputs.iter().zip(&rows.targets) {
        let pred = model.target_norm.denormalize(&model.net.forward(x)?);
        let truth = model.target_norm.denormalize(t);
        if truth.iter().any(|v| *v == 0.0) {
            excluded += 1;
            continue;
        }
        errors.push(pred.iter().zip(&truth).map(|(p, t)| ((p - t) / t).abs()).sum::<f64>() / truth.len() as f64);
    }
    if errors.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let max = errors.iter().copied().fold(0.0, f64::max);
    Ok(EvalReport { errors, mean, max, excluded })
}
