//! Stochastic calibration of the beam-law parameter distribution against
//! single-track width and depth statistics.

mod data;
mod nelder_mead;
mod objective;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use data::{builtin_afrl, cases_from_csv, cases_to_csv, ExperimentCase};
pub use nelder_mead::{minimize, Outcome, Stop};
pub use objective::{
    kld_normal_vs_kde, objective, propagate, truncated_draws, CaseKld, CommonDraws, Propagated, PropagationConfig,
};

use crate::error::{Error, Result};
use crate::hopgd::Surrogate;
use crate::stats::TriNormal;

/// Mean and Cholesky factor of the (P1, P2, P3) distribution.
pub type HyperParams = TriNormal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub propagation: PropagationConfig,
    /// Evaluation budget of each Nelder–Mead run.
    pub max_evaluations: usize,
    /// Additional runs restarted from the incumbent with a randomized simplex.
    pub restarts: usize,
    /// Simplex size in the scaled coordinates.
    pub simplex_tol: f64,
    /// Stop as soon as the objective falls to this value.
    pub target_objective: Option<f64>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            propagation: PropagationConfig::default(),
            max_evaluations: 2000,
            restarts: 3,
            simplex_tol: 1e-6,
            target_objective: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub hyper: HyperParams,
    pub objective_value: f64,
    pub initial_objective: f64,
    pub per_case_kld: Vec<CaseKld>,
    /// Objective evaluations over all runs.
    pub iterations: usize,
    pub converged: bool,
    pub settings_hash: String,
    /// Incumbent objective after every Nelder–Mead iteration.
    pub history: Vec<f64>,
}

impl CalibrationResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Order-of-magnitude starting point at e = 240 J/m: source depth 100 µm,
/// radius 50 µm, absorptivity on its lower clamp; 10% standard deviations.
pub fn initial_guess() -> HyperParams {
    let e = 240.0;
    let mean = [1e-4 / e, crate::heat_source::MIN_ABSORPTIVITY / e, 5e-5 / e];
    let mut chol = [[0.0; 3]; 3];
    for i in 0..3 {
        chol[i][i] = 0.1 * mean[i];
    }
    TriNormal { mean, chol }
}

/// Scaled coordinates: means relative to the initial means, log of the
/// relative Cholesky diagonal, and the relative off-diagonal entries.
struct Scaling([f64; 3]);

impl Scaling {
    fn encode(&self, h: &HyperParams) -> Vec<f64> {
        let s = &self.0;
        let l = &h.chol;
        vec![
            h.mean[0] / s[0],
            h.mean[1] / s[1],
            h.mean[2] / s[2],
            (l[0][0] / s[0]).ln(),
            (l[1][1] / s[1]).ln(),
            (l[2][2] / s[2]).ln(),
            l[1][0] / s[1],
            l[2][0] / s[2],
            l[2][1] / s[2],
        ]
    }

    fn decode(&self, t: &[f64]) -> Option<HyperParams> {
        let s = &self.0;
        if t[..3].iter().any(|v| !(*v > 0.0)) || t.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let chol = [
            [s[0] * t[3].exp(), 0.0, 0.0],
            [s[1] * t[6], s[1] * t[4].exp(), 0.0],
            [s[2] * t[7], s[2] * t[8], s[2] * t[5].exp()],
        ];
        let h = TriNormal { mean: [s[0] * t[0], s[1] * t[1], s[2] * t[2]], chol };
        h.validate().ok().map(|_| h)
    }
}

const STEPS: [f64; 9] = [0.05, 0.05, 0.05, 0.3, 0.3, 0.3, 0.02, 0.02, 0.02];

/// Minimize the KLD objective over the nine hyperparameters.
///
/// Candidates whose propagation fails (range coverage, truncation) score
/// `+∞`. The result never has a larger objective than `init`; when no run
/// improves on it the init is returned with `converged = false`.
pub fn calibrate(
    init: &HyperParams,
    surrogate: &Surrogate,
    cases: &[ExperimentCase],
    config: &CalibrationConfig,
) -> Result<CalibrationResult> {
    init.validate()?;
    config.propagation.validate()?;
    for c in cases {
        c.validate()?;
    }
    let pc = &config.propagation;
    let draws = CommonDraws::new(cases, pc.n_mc, pc.seed);
    let (f_init, _) = objective(init, surrogate, cases, &draws, pc)?;
    if !f_init.is_finite() {
        return Err(Error::InvalidInput(format!("objective is not finite at the initial point: {f_init}")));
    }
    let scaling = Scaling(init.mean.map(f64::abs));
    let f = |t: &[f64]| match scaling.decode(t) {
        Some(h) => objective(&h, surrogate, cases, &draws, pc).map_or(f64::INFINITY, |(v, _)| v),
        None => f64::INFINITY,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(pc.seed.wrapping_add(0x5EED));
    let mut best_x = scaling.encode(init);
    let mut best_f = f_init;
    let mut evaluations = 1;
    let mut history = vec![f_init];
    let mut last_stop = Stop::Budget;
    for run in 0..=config.restarts {
        let steps: Vec<f64> = if run == 0 {
            STEPS.to_vec()
        } else {
            STEPS.iter().map(|s| s * rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
        };
        let out = minimize(&f, &best_x, &steps, config.simplex_tol, config.max_evaluations, config.target_objective);
        evaluations += out.evaluations;
        history.extend(out.history.iter().map(|v| v.min(best_f)));
        last_stop = out.stop;
        let improved = out.f < best_f - 1e-12 * best_f.abs();
        if out.f < best_f {
            best_f = out.f;
            best_x = out.x;
        }
        if out.stop == Stop::Target || (run > 0 && !improved) {
            break;
        }
    }

    let hyper = if best_f < f_init { scaling.decode(&best_x).expect("finite objective implies a valid point") } else { *init };
    let (_, per_case_kld) = objective(&hyper, surrogate, cases, &draws, pc)?;
    let objective_value = objective::total(&per_case_kld);
    let progressed = objective_value < f_init || last_stop == Stop::Target;
    let converged = progressed && matches!(last_stop, Stop::SimplexSize | Stop::Target);
    let settings_hash = crate::hash::settings_hash(&(init, cases, config, &surrogate.provenance.config_hash))?;
    Ok(CalibrationResult {
        hyper,
        objective_value,
        initial_objective: f_init,
        per_case_kld,
        iterations: evaluations,
        converged,
        settings_hash,
        history,
    })
}

/// Tables produced by pushing `truth` through the surrogate: sample mean and
/// standard deviation of `n` draws at each template case's energy density.
pub fn synthetic_cases(
    truth: &HyperParams,
    surrogate: &Surrogate,
    template: &[ExperimentCase],
    n: usize,
    seed: u64,
) -> Result<Vec<ExperimentCase>> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let draws = CommonDraws::new(template, n, seed);
    template
        .iter()
        .enumerate()
        .map(|(c, case)| {
            let params = truncated_draws(truth, draws.stream(c), n)?;
            let e = case.energy();
            let (mut w, mut d) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for p in params {
                let (wi, di, _) = surrogate.predict([e, p[0], p[1], p[2]]);
                w.push(wi.max(0.0) * 1e6);
                d.push(di.max(0.0) * 1e6);
            }
            let (wm, ws) = mean_std(&w);
            let (dm, ds) = mean_std(&d);
            Ok(ExperimentCase {
                id: case.id.clone(),
                width_mean: wm,
                width_std: ws,
                depth_mean: dm,
                depth_std: ds,
                n_width: n,
                n_depth: n,
                ..case.clone()
            })
        })
        .collect()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}
