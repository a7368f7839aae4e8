use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat_source::{generate_path, PathGeometry, StochasticBeamLaw};
use crate::hopgd::{design_grid, fit, insert_node, sample_grid, suggest_refinement, FitOptions, SampleGrid, SeparatedModel};
use crate::material::MaterialModel;
use crate::solver::{run_scan, steady_dims, Domain, ParamSource, ProcessSettings, SolverConfig};

/// Settings for building the melt-pool surrogate from solver runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    /// Ranges of e (J/m), P1, P2 and P3.
    pub ranges: [(f64, f64); 4],
    pub levels: [usize; 4],
    /// One cross-validated bisection round.
    pub refine: bool,
    /// Scan speed of the snapshot runs, m/s; power is `e·v_ref`.
    pub v_ref: f64,
    pub dx: f64,
    /// Plate length, half-width and height, m.
    pub plate: [f64; 3],
    /// Scan start and end along x, m.
    pub scan: [f64; 2],
    /// Cross-sections averaged for the steady dimensions, m.
    pub window: [f64; 2],
    pub fit: FitOptions,
    pub solver: SolverConfig,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            ranges: [(150.0, 335.0), (1.5e-7, 5.5e-7), (5.0e-4, 4.0e-3), (0.8e-7, 3.5e-7)],
            levels: [5; 4],
            refine: false,
            v_ref: 1.23,
            dx: 1.0e-5,
            plate: [6.0e-4, 3.0e-4, 3.5e-4],
            scan: [5.0e-5, 5.0e-4],
            window: [2.5e-4, 3.5e-4],
            fit: FitOptions::default(),
            solver: SolverConfig { trace_stride: 0, ..SolverConfig::default() },
        }
    }
}

/// Single-track solver runs at fixed (e, P1, P2, P3).
#[derive(Debug, Clone)]
pub struct SolverSampler {
    pub material: MaterialModel,
    pub config: SurrogateConfig,
    domain: Domain,
}

impl SolverSampler {
    pub fn new(material: MaterialModel, config: SurrogateConfig) -> Result<Self> {
        let [len, half, height] = config.plate;
        let domain = Domain::single_track(config.dx, len, 2.0 * half, height, true)?;
        if !(config.scan[0] < config.window[0] && config.window[1] < config.scan[1] && config.scan[1] < len) {
            return Err(Error::Config("surrogate window must lie inside the scanned stretch".into()));
        }
        Ok(SolverSampler { material, config, domain })
    }

    /// Steady width and depth (m) at `q = (e, P1, P2, P3)`.
    pub fn simulate(&self, q: [f64; 4]) -> Result<(f64, f64)> {
        let law = StochasticBeamLaw::new(q[1], q[2], q[3])?;
        self.simulate_process(q[0] * self.config.v_ref, self.config.v_ref, &law)
    }

    /// Steady width and depth (m) of a track at the given power (W) and
    /// speed (m/s) on the sampler's plate.
    pub fn simulate_process(&self, power: f64, speed: f64, law: &StochasticBeamLaw) -> Result<(f64, f64)> {
        let c = &self.config;
        let law = *law;
        let geom = PathGeometry::single_track(c.scan[1] - c.scan[0], [c.scan[0], 0.0, 0.0]);
        let path = generate_path(&geom, speed, c.dx / speed, None)?;
        let run = run_scan(
            &self.domain,
            &self.material,
            &path,
            ParamSource::Law(law),
            ProcessSettings { power, speed, rhf: None },
            &c.solver,
        )?;
        let dims = steady_dims(&run.state, &self.domain, &self.material, c.window[0], c.window[1])?;
        Ok((dims.width, dims.depth))
    }
}

/// Where a surrogate came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub snapshots: usize,
}

/// Separated models of melt-pool width and depth (both in m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub width: SeparatedModel,
    pub depth: SeparatedModel,
    #[serde(default)]
    pub provenance: Provenance,
}

impl Surrogate {
    /// Fit both outputs on a sampled grid.
    pub fn from_grid(grid: &SampleGrid, opts: &FitOptions) -> Result<Self> {
        Ok(Surrogate {
            width: fit(&grid.width_tensor(), opts)?,
            depth: fit(&grid.depth_tensor(), opts)?,
            provenance: Provenance { snapshots: grid.mask.iter().filter(|m| **m).count(), ..Default::default() },
        })
    }

    /// Sample the solver on the design grid (plus an optional refinement
    /// round on the width output) and fit.
    pub fn build(sampler: &SolverSampler) -> Result<(Self, SampleGrid)> {
        let c = &sampler.config;
        let nodes = design_grid(c.ranges, c.levels)?;
        let run = |q: [f64; 4]| sampler.simulate(q);
        let mut grid = sample_grid(nodes, run)?;
        if c.refine {
            if let Some(r) = suggest_refinement(&grid.width_tensor(), &c.fit)? {
                grid = insert_node(&grid, r.axis, r.new_node, run)?;
            }
        }
        let mut s = Self::from_grid(&grid, &c.fit)?;
        s.provenance.config_hash = crate::hash::settings_hash(&(c, &sampler.material))?;
        Ok((s, grid))
    }

    /// Width and depth (m) and whether the query was clamped into range.
    pub fn predict(&self, q: [f64; 4]) -> (f64, f64, bool) {
        let (w, ow) = self.width.evaluate(q);
        let (d, od) = self.depth.evaluate(q);
        (w, d, ow || od)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
