use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hopgd::fit::{fit, unflatten, FitOptions};
use crate::hopgd::evaluate;

/// Dense 4D table over axis nodes, last axis fastest, with a fill mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor4 {
    pub axis_nodes: [Vec<f64>; 4],
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Tensor4 {
    pub fn from_fn(axis_nodes: [Vec<f64>; 4], f: impl Fn([f64; 4]) -> f64) -> Self {
        let shape = axis_nodes.each_ref().map(Vec::len);
        let n: usize = shape.iter().product();
        let values = (0..n)
            .map(|flat| {
                let ix = unflatten(flat, shape);
                f(std::array::from_fn(|a| axis_nodes[a][ix[a]]))
            })
            .collect();
        Tensor4 { axis_nodes, values, mask: vec![true; n] }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.axis_nodes.each_ref().map(Vec::len)
    }

    pub fn flat(&self, ix: [usize; 4]) -> usize {
        let n = self.shape();
        ((ix[0] * n[1] + ix[1]) * n[2] + ix[2]) * n[3] + ix[3]
    }

    pub fn validate(&self) -> Result<()> {
        for (a, nodes) in self.axis_nodes.iter().enumerate() {
            if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidInput(format!("axis {a} nodes must be strictly increasing (≥ 2)")));
            }
        }
        let n: usize = self.shape().iter().product();
        if self.values.len() != n || self.mask.len() != n {
            return Err(Error::InvalidInput("tensor size does not match its axes".into()));
        }
        if self.values.iter().zip(&self.mask).any(|(v, &m)| m && !v.is_finite()) {
            return Err(Error::InvalidInput("tensor has non-finite entries".into()));
        }
        Ok(())
    }

    /// Copy without the node `node` of `axis`.
    pub fn without(&self, axis: usize, node: usize) -> Tensor4 {
        let mut nodes = self.axis_nodes.clone();
        nodes[axis].remove(node);
        let shape = self.shape();
        let mut values = Vec::new();
        let mut mask = Vec::new();
        for flat in 0..self.values.len() {
            if unflatten(flat, shape)[axis] != node {
                values.push(self.values[flat]);
                mask.push(self.mask[flat]);
            }
        }
        Tensor4 { axis_nodes: nodes, values, mask }
    }
}

/// Snapshot table of simulated widths and depths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub axis_nodes: [Vec<f64>; 4],
    /// m, last axis fastest.
    pub width: Vec<f64>,
    /// m.
    pub depth: Vec<f64>,
    pub mask: Vec<bool>,
}

impl SampleGrid {
    pub fn width_tensor(&self) -> Tensor4 {
        Tensor4 { axis_nodes: self.axis_nodes.clone(), values: self.width.clone(), mask: self.mask.clone() }
    }

    pub fn depth_tensor(&self) -> Tensor4 {
        Tensor4 { axis_nodes: self.axis_nodes.clone(), values: self.depth.clone(), mask: self.mask.clone() }
    }

    pub fn len(&self) -> usize {
        self.width.len()
    }

    pub fn is_empty(&self) -> bool {
        self.width.is_empty()
    }
}

/// Evenly spaced nodes on each axis.
pub fn design_grid(ranges: [(f64, f64); 4], levels: [usize; 4]) -> Result<[Vec<f64>; 4]> {
    for a in 0..4 {
        let (lo, hi) = ranges[a];
        if levels[a] < 2 {
            return Err(Error::InvalidInput(format!("axis {a} needs at least 2 levels")));
        }
        if !(hi > lo && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidInput(format!("axis {a} range [{lo}, {hi}] is empty")));
        }
    }
    Ok(std::array::from_fn(|a| {
        let (lo, hi) = ranges[a];
        let n = levels[a];
        (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
    }))
}

/// Evaluate `sampler` at every node combination in parallel; results are
/// gathered in node order.
pub fn sample_grid<F>(axis_nodes: [Vec<f64>; 4], sampler: F) -> Result<SampleGrid>
where
    F: Fn([f64; 4]) -> Result<(f64, f64)> + Sync,
{
    let shape = axis_nodes.each_ref().map(Vec::len);
    let n: usize = shape.iter().product();
    let out: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|flat| {
            let ix = unflatten(flat, shape);
            sampler(std::array::from_fn(|a| axis_nodes[a][ix[a]]))
        })
        .collect::<Result<_>>()?;
    let (width, depth) = out.into_iter().unzip();
    Ok(SampleGrid { axis_nodes, width, depth, mask: vec![true; n] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub axis: usize,
    /// Interior node whose hyperplane was worst predicted when left out.
    pub worst_node: usize,
    /// Max relative error on that hyperplane.
    pub error: f64,
    /// Midpoint of the wider interval next to the worst node.
    pub new_node: f64,
}

/// Leave-one-hyperplane-out cross-validation over interior nodes; returns
/// where to bisect, or `None` when no axis has interior nodes.
pub fn suggest_refinement(data: &Tensor4, opts: &FitOptions) -> Result<Option<Refinement>> {
    let scale = data.values.iter().zip(&data.mask).filter(|(_, &m)| m).fold(0.0f64, |a, (v, _)| a.max(v.abs()));
    let shape = data.shape();
    let mut best: Option<Refinement> = None;
    for axis in 0..4 {
        for node in 1..shape[axis].saturating_sub(1) {
            let model = fit(&data.without(axis, node), opts)?;
            let mut err: f64 = 0.0;
            for flat in 0..data.values.len() {
                let ix = unflatten(flat, shape);
                if ix[axis] != node || !data.mask[flat] {
                    continue;
                }
                let q = std::array::from_fn(|a| data.axis_nodes[a][ix[a]]);
                let (v, _) = evaluate(&model, q);
                err = err.max((v - data.values[flat]).abs() / scale.max(1e-300));
            }
            if best.is_none_or(|b| err > b.error) {
                let nodes = &data.axis_nodes[axis];
                let (left, right) = (nodes[node] - nodes[node - 1], nodes[node + 1] - nodes[node]);
                let new_node = if right > left {
                    0.5 * (nodes[node] + nodes[node + 1])
                } else {
                    0.5 * (nodes[node - 1] + nodes[node])
                };
                best = Some(Refinement { axis, worst_node: node, error: err, new_node });
            }
        }
    }
    Ok(best)
}

/// Insert a node on `axis`, sampling the new hyperplane.
pub fn insert_node<F>(grid: &SampleGrid, axis: usize, value: f64, sampler: F) -> Result<SampleGrid>
where
    F: Fn([f64; 4]) -> Result<(f64, f64)> + Sync,
{
    let nodes = &grid.axis_nodes[axis];
    if nodes.iter().any(|&v| v == value) {
        return Err(Error::InvalidInput(format!("node {value} already on axis {axis}")));
    }
    let mut axis_nodes = grid.axis_nodes.clone();
    axis_nodes[axis].push(value);
    axis_nodes[axis].sort_by(f64::total_cmp);
    let pos = axis_nodes[axis].iter().position(|&v| v == value).unwrap();
    let new_shape = axis_nodes.each_ref().map(Vec::len);
    let old = Tensor4 { axis_nodes: grid.axis_nodes.clone(), values: vec![], mask: vec![] };
    let n: usize = new_shape.iter().product();
    let fresh: Vec<Option<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|flat| {
            let ix = unflatten(flat, new_shape);
            if ix[axis] == pos {
                sampler(std::array::from_fn(|a| axis_nodes[a][ix[a]])).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let mut width = Vec::with_capacity(n);
    let mut depth = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    for (flat, f) in fresh.into_iter().enumerate() {
        match f {
            Some((w, d)) => {
                width.push(w);
                depth.push(d);
                mask.push(true);
            }
            None => {
                let mut ix = unflatten(flat, new_shape);
                if ix[axis] > pos {
                    ix[axis] -= 1;
                }
                let o = old.flat(ix);
                width.push(grid.width[o]);
                depth.push(grid.depth[o]);
                mask.push(grid.mask[o]);
            }
        }
    }
    Ok(SampleGrid { axis_nodes, width, depth, mask })
}
