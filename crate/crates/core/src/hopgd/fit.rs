use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hopgd::Tensor4;

/// Sum of products of per-axis tables defined on the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedModel {
    pub axis_nodes: [Vec<f64>; 4],
    /// `modes[m][axis][node]`.
    pub modes: Vec<[Vec<f64>; 4]>,
    /// Relative L2 misfit over the fitted entries.
    pub fit_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct FitOptions {
    /// Stop adding modes once the relative residual drops below this.
    pub tol: f64,
    pub max_modes: usize,
    /// Fixed-point tolerance on the relative change of a mode.
    pub mode_tol: f64,
    pub max_sweeps: usize,
    /// Joint least-squares sweeps over all modes after each enrichment.
    pub refine_sweeps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tol: 1e-4, max_modes: 8, mode_tol: 1e-8, max_sweeps: 500, refine_sweeps: 2000 }
    }
}

/// Entries of a tensor as flat (multi-index, value) lists.
struct Entries {
    idx: Vec<[usize; 4]>,
    val: Vec<f64>,
}

impl Entries {
    fn of(t: &Tensor4) -> Self {
        let n = t.shape();
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (flat, (&v, &m)) in t.values.iter().zip(&t.mask).enumerate() {
            if m {
                idx.push(unflatten(flat, n));
                val.push(v);
            }
        }
        Entries { idx, val }
    }
}

pub(crate) fn unflatten(mut flat: usize, n: [usize; 4]) -> [usize; 4] {
    let mut out = [0; 4];
    for a in (0..4).rev() {
        out[a] = flat % n[a];
        flat /= n[a];
    }
    out
}

fn product_except(mode: &[Vec<f64>; 4], ix: &[usize; 4], skip: usize) -> f64 {
    let mut p = 1.0;
    for a in 0..4 {
        if a != skip {
            p *= mode[a][ix[a]];
        }
    }
    p
}

fn mode_value(mode: &[Vec<f64>; 4], ix: &[usize; 4]) -> f64 {
    mode[0][ix[0]] * mode[1][ix[1]] * mode[2][ix[2]] * mode[3][ix[3]]
}

fn residual_norm(e: &Entries, modes: &[[Vec<f64>; 4]]) -> f64 {
    e.idx
        .iter()
        .zip(&e.val)
        .map(|(ix, v)| {
            let r = v - modes.iter().map(|m| mode_value(m, ix)).sum::<f64>();
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Least-squares update of the tables of every mode along `axis`, holding
/// the other axes fixed: one small normal system per node.
fn update_axis(e: &Entries, modes: &mut [[Vec<f64>; 4]], axis: usize, shape: [usize; 4]) {
    let m = modes.len();
    let nodes = shape[axis];
    let mut gram = vec![vec![0.0; m * m]; nodes];
    let mut rhs = vec![vec![0.0; m]; nodes];
    let mut p = vec![0.0; m];
    for (ix, &v) in e.idx.iter().zip(&e.val) {
        for (q, mode) in modes.iter().enumerate() {
            p[q] = product_except(mode, ix, axis);
        }
        let node = ix[axis];
        for q in 0..m {
            rhs[node][q] += v * p[q];
            for r in 0..m {
                gram[node][q * m + r] += p[q] * p[r];
            }
        }
    }
    for node in 0..nodes {
        // Nodes without data keep their tables.
        let trace: f64 = (0..m).map(|q| gram[node][q * m + q]).sum();
        if trace <= 0.0 {
            continue;
        }
        if let Some(x) = solve_spd(&mut gram[node], &rhs[node], m, 1e-13 * trace / m as f64) {
            for q in 0..m {
                modes[q][axis][node] = x[q];
            }
        }
    }
}

/// Solve a small symmetric positive semi-definite system by Cholesky with a
/// tiny ridge.
fn solve_spd(a: &mut [f64], b: &[f64], n: usize, ridge: f64) -> Option<Vec<f64>> {
    for i in 0..n {
        a[i * n + i] += ridge;
    }
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i * n + k] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k * n + i] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    Some(y)
}

/// Rescale the tables of a mode so the last three have unit max-norm.
fn balance(mode: &mut [Vec<f64>; 4]) {
    for a in 1..4 {
        let s = mode[a].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if s > 0.0 {
            mode[a].iter_mut().for_each(|v| *v /= s);
            mode[0].iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Start a rank-one mode from the residual fibers through its largest
/// entry (missing fiber entries fall back to 1).
fn fiber_init(data: &Tensor4, r: &Entries, shape: [usize; 4]) -> [Vec<f64>; 4] {
    let (mut best, mut big) = (0, -1.0);
    for (k, v) in r.val.iter().enumerate() {
        if v.abs() > big {
            big = v.abs();
            best = k;
        }
    }
    let pivot = r.idx[best];
    let mut dense = vec![f64::NAN; data.values.len()];
    for (ix, v) in r.idx.iter().zip(&r.val) {
        dense[data.flat(*ix)] = *v;
    }
    std::array::from_fn(|a| {
        (0..shape[a])
            .map(|i| {
                let mut ix = pivot;
                ix[a] = i;
                let v = dense[data.flat(ix)];
                if a == 0 {
                    if v.is_nan() { 0.0 } else { v }
                } else if v.is_nan() || big == 0.0 {
                    1.0
                } else {
                    v / big
                }
            })
            .collect()
    })
}

/// Greedy fit: each new mode is a rank-one alternating fixed point on the
/// current residual, after which all modes are refined jointly by
/// alternating least squares.
pub fn fit(data: &Tensor4, opts: &FitOptions) -> Result<SeparatedModel> {
    data.validate()?;
    if opts.max_modes == 0 {
        return Err(Error::InvalidInput("max_modes must be at least 1".into()));
    }
    let shape = data.shape();
    let mut e = Entries::of(data);
    if e.val.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let scale = e.val.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let norm_raw = e.val.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        let modes = vec![[vec![0.0; shape[0]], vec![1.0; shape[1]], vec![1.0; shape[2]], vec![1.0; shape[3]]]];
        return Ok(SeparatedModel { axis_nodes: data.axis_nodes.clone(), modes, fit_residual: 0.0 });
    }
    e.val.iter_mut().for_each(|v| *v /= scale);
    let norm = norm_raw / scale;

    let mut modes: Vec<[Vec<f64>; 4]> = Vec::new();
    let mut residual = 1.0;
    while modes.len() < opts.max_modes && residual > opts.tol {
        // Residual data for the enrichment step.
        let r = Entries {
            idx: e.idx.clone(),
            val: e.idx.iter().zip(&e.val).map(|(ix, v)| v - modes.iter().map(|m| mode_value(m, ix)).sum::<f64>()).collect(),
        };
        let mut new = fiber_init(data, &r, shape);
        let mut converged = false;
        for _ in 0..opts.max_sweeps {
            let before: Vec<f64> = r.idx.iter().map(|ix| mode_value(&new, ix)).collect();
            let mut single = [new];
            for axis in 0..4 {
                update_axis(&r, &mut single, axis, shape);
            }
            [new] = single;
            balance(&mut new);
            let (mut diff, mut size) = (0.0, 0.0);
            for (ix, b) in r.idx.iter().zip(&before) {
                let a = mode_value(&new, ix);
                diff += (a - b) * (a - b);
                size += a * a;
            }
            if diff.sqrt() <= opts.mode_tol * size.sqrt().max(1e-300) || size == 0.0 {
                converged = true;
                break;
            }
        }
        if !converged {
            modes.push(new);
            let res = residual_norm(&e, &modes) / norm;
            return Err(Error::FitFailure { sweeps: opts.max_sweeps, residual: res });
        }
        modes.push(new);
        let mut prev = residual_norm(&e, &modes) / norm;
        if modes.len() > 1 {
            for _ in 0..opts.refine_sweeps {
                for axis in 0..4 {
                    update_axis(&e, &mut modes, axis, shape);
                }
                modes.iter_mut().for_each(balance);
                let now = residual_norm(&e, &modes) / norm;
                let done = prev - now <= 1e-10 * prev.max(1e-300);
                prev = now;
                if done {
                    break;
                }
            }
        }
        if prev >= residual && modes.len() > 1 {
            // No gain from this mode: drop it and stop.
            modes.pop();
            break;
        }
        residual = prev;
    }
    for m in &mut modes {
        m[0].iter_mut().for_each(|v| *v *= scale);
    }
    Ok(SeparatedModel { axis_nodes: data.axis_nodes.clone(), modes, fit_residual: residual })
}

/// Interpolation weights of `x` on sorted `nodes`; clamps outside the range
/// and reports it.
fn locate(nodes: &[f64], x: f64) -> (usize, f64, bool) {
    let n = nodes.len();
    if x <= nodes[0] {
        return (0, 0.0, x < nodes[0]);
    }
    if x >= nodes[n - 1] {
        return (n - 2, 1.0, x > nodes[n - 1]);
    }
    let i = nodes.partition_point(|&v| v <= x) - 1;
    (i, (x - nodes[i]) / (nodes[i + 1] - nodes[i]), false)
}

/// Value at `q = (e, P1, P2, P3)` with per-axis linear interpolation, and
/// whether any coordinate was clamped into range.
pub fn evaluate(model: &SeparatedModel, q: [f64; 4]) -> (f64, bool) {
    let mut loc = [(0, 0.0); 4];
    let mut outside = false;
    for a in 0..4 {
        let (i, w, o) = locate(&model.axis_nodes[a], q[a]);
        loc[a] = (i, w);
        outside |= o;
    }
    let mut total = 0.0;
    for mode in &model.modes {
        let mut p = 1.0;
        for a in 0..4 {
            let (i, w) = loc[a];
            p *= mode[a][i] * (1.0 - w) + mode[a][i + 1] * w;
        }
        total += p;
    }
    (total, outside)
}

impl SeparatedModel {
    pub fn evaluate(&self, q: [f64; 4]) -> (f64, bool) {
        evaluate(self, q)
    }

    pub fn rank(&self) -> usize {
        self.modes.len()
    }
}
