use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentCase;
use crate::error::{Error, Result};
use crate::hopgd::Surrogate;
use crate::stats::{kld, KdeModel, TriNormal, UniformGrid};

/// Monte-Carlo settings shared by every objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub n_mc: usize,
    pub seed: u64,
    pub grid_nodes: usize,
    /// Lower bound on the KDE bandwidth, µm.
    pub bandwidth_floor: f64,
    /// Largest tolerated fraction of extrapolating surrogate queries.
    pub max_outside_fraction: f64,
    /// Widen the experimental normal by the KDE kernel, so both sides of
    /// the divergence carry the same smoothing.
    pub kernel_matched: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig { n_mc: 2000, seed: 2024, grid_nodes: 2001, bandwidth_floor: 0.25, max_outside_fraction: 0.01, kernel_matched: false }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_mc < 1000 {
            return Err(Error::InvalidInput(format!("n_mc must be at least 1000, got {}", self.n_mc)));
        }
        if self.grid_nodes < 3 || !(self.bandwidth_floor > 0.0) || !(0.0..=1.0).contains(&self.max_outside_fraction) {
            return Err(Error::InvalidInput("invalid propagation settings".into()));
        }
        Ok(())
    }
}

/// Fixed standard-normal draws, one stream per case, so that the objective
/// is a deterministic function of the hyperparameters.
#[derive(Debug, Clone)]
pub struct CommonDraws {
    streams: Vec<Vec<[f64; 3]>>,
    n_mc: usize,
}

impl CommonDraws {
    /// One stream of `4·n_mc` triples per case, seeded from `seed` and the
    /// case id so that reordering cases does not change any draw.
    pub fn new(cases: &[ExperimentCase], n_mc: usize, seed: u64) -> Self {
        let streams = cases
            .iter()
            .map(|case| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(case.id.as_bytes()));
                (0..4 * n_mc)
                    .map(|_| {
                        [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)]
                    })
                    .collect()
            })
            .collect();
        CommonDraws { streams, n_mc }
    }

    pub fn n_mc(&self) -> usize {
        self.n_mc
    }

    /// Standard-normal triples reserved for case `c`.
    pub fn stream(&self, c: usize) -> &[[f64; 3]] {
        &self.streams[c]
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// First `n` admissible transforms `μ + L·z` of a draw stream; draws with a
/// non-positive component are skipped (rejected and replaced by the next).
pub fn truncated_draws(hyper: &TriNormal, z: &[[f64; 3]], n: usize) -> Result<Vec<[f64; 3]>> {
    let out: Vec<[f64; 3]> = z.iter().map(|z| hyper.transform(*z)).filter(|x| hyper.admissible(x)).take(n).collect();
    if out.len() < n {
        return Err(Error::DegenerateModel(format!("only {} of {n} draws have positive components", out.len())));
    }
    Ok(out)
}

/// Simulated width and depth densities of one case.
#[derive(Debug, Clone)]
pub struct Propagated {
    pub width: KdeModel,
    pub depth: KdeModel,
    pub outside_fraction: f64,
}

/// Draw `n_mc` parameter vectors from `hyper` using the fixed normals `z`
/// and push them through the surrogate at the case energy density; widths
/// and depths in µm.
pub fn propagate(
    hyper: &TriNormal,
    surrogate: &Surrogate,
    case: &ExperimentCase,
    z: &[[f64; 3]],
    cfg: &PropagationConfig,
) -> Result<Propagated> {
    let params = truncated_draws(hyper, z, cfg.n_mc)?;
    let e = case.energy();
    let mut w = Vec::with_capacity(params.len());
    let mut d = Vec::with_capacity(params.len());
    let mut outside = 0usize;
    for p in &params {
        let (wi, di, out) = surrogate.predict([e, p[0], p[1], p[2]]);
        if out {
            outside += 1;
        }
        w.push(wi.max(0.0) * 1e6);
        d.push(di.max(0.0) * 1e6);
    }
    let outside_fraction = outside as f64 / params.len().max(1) as f64;
    if outside_fraction > cfg.max_outside_fraction {
        return Err(Error::RangeCoverage { fraction: outside_fraction });
    }
    let kde = |v: Vec<f64>| -> Result<KdeModel> {
        let h = crate::stats::silverman_bandwidth(&v)?.max(cfg.bandwidth_floor);
        KdeModel::with_bandwidth(v, h)
    };
    Ok(Propagated { width: kde(w)?, depth: kde(d)?, outside_fraction })
}

fn normal_pdf(x: f64, mu: f64, sd: f64) -> f64 {
    let u = (x - mu) / sd;
    (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// `D(N(μ, σ²) ‖ kde)` on a grid covering both ±5σ and the KDE support.
pub fn kld_normal_vs_kde(mu: f64, sd: f64, kde: &KdeModel, nodes: usize) -> Result<f64> {
    if !(sd > 0.0) {
        return Err(Error::InvalidInput(format!("experimental std must be positive, got {sd}")));
    }
    let h = kde.bandwidth;
    let lo = (mu - 5.0 * sd).min(kde.min() - 5.0 * h);
    let hi = (mu + 5.0 * sd).max(kde.max() + 5.0 * h);
    let grid = UniformGrid::new(lo, hi, nodes)?;
    let p: Vec<f64> = grid.nodes().iter().map(|&x| normal_pdf(x, mu, sd)).collect();
    let q = kde.pdf_on_grid(&grid);
    kld(&p, &q, &grid)
}

/// Width and depth KLD terms of one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseKld {
    pub id: String,
    pub width: f64,
    pub depth: f64,
}

/// `Σ_i KLD(f_We‖f_Ws) + KLD(f_De‖f_Ds)` with its per-case terms.
pub fn objective(
    hyper: &TriNormal,
    surrogate: &Surrogate,
    cases: &[ExperimentCase],
    draws: &CommonDraws,
    cfg: &PropagationConfig,
) -> Result<(f64, Vec<CaseKld>)> {
    if cases.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if draws.streams.len() < cases.len() || draws.n_mc < cfg.n_mc {
        return Err(Error::InvalidInput("fewer draw streams than cases".into()));
    }
    let terms: Vec<CaseKld> = cases
        .par_iter()
        .enumerate()
        .map(|(c, case)| {
            let sim = propagate(hyper, surrogate, case, draws.stream(c), cfg)?;
            let widen = |sd: f64, kde: &KdeModel| {
                if cfg.kernel_matched {
                    sd.hypot(kde.bandwidth)
                } else {
                    sd
                }
            };
            Ok(CaseKld {
                id: case.id.clone(),
                width: kld_normal_vs_kde(case.width_mean, widen(case.width_std, &sim.width), &sim.width, cfg.grid_nodes)?,
                depth: kld_normal_vs_kde(case.depth_mean, widen(case.depth_std, &sim.depth), &sim.depth, cfg.grid_nodes)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((total(&terms), terms))
}

pub(crate) fn total(terms: &[CaseKld]) -> f64 {
    terms.iter().map(|t| t.width + t.depth).sum()
}
