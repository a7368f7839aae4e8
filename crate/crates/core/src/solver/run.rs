use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat_source::{beam_from_law, rhf_profile, BeamState, RhfConfig, ScanPath, StochasticBeamLaw};
use crate::material::MaterialModel;
use crate::solver::energy::{stable_dt, step_energy_with, BeamPose, EnergyWorkspace};
use crate::solver::fluid::step_fluid;
use crate::solver::meltpool::extract_meltpool_dims;
use crate::solver::{Domain, SolverConfig, SolverMode, ThermalState};
use crate::stats::{mvn_sample, TriNormal};

/// Where the heat-source parameters come from at each step.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSource {
    /// Fixed beam, ignoring laws and the residual heat factor.
    Beam(BeamState),
    /// Deterministic laws.
    Law(StochasticBeamLaw),
    /// Independent draws of (P1, P2, P3), refreshed every `resample_every`
    /// steps.
    Sampled { model: TriNormal, seed: u64, resample_every: usize },
    /// Successive states of a precomputed chain, cycled.
    Chain { states: Vec<[f64; 3]>, resample_every: usize },
}

/// Process settings of one scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSettings {
    /// W.
    pub power: f64,
    /// m/s.
    pub speed: f64,
    /// Couple the laws to the residual heat factor along the path.
    #[serde(default)]
    pub rhf: Option<RhfConfig>,
}

/// One row of a scan trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub x_beam: f64,
    pub width: f64,
    pub depth: f64,
    pub rhf: f64,
    pub absorptivity: f64,
    pub radius: f64,
    pub source_depth: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Vec<TracePoint>,
    pub state: ThermalState,
    pub dt: f64,
}

/// Stepper that couples the energy (and optionally flow) update to a scan
/// path.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub domain: Domain,
    pub material: MaterialModel,
    pub config: SolverConfig,
    pub state: ThermalState,
    pub dt: f64,
    path: ScanPath,
    source: ParamSource,
    process: ProcessSettings,
    rhf: Vec<f64>,
    rng: ChaCha8Rng,
    law: Option<StochasticBeamLaw>,
    draws: usize,
    ws: EnergyWorkspace,
    pub trace: Vec<TracePoint>,
}

impl Simulation {
    pub fn new(
        domain: Domain,
        material: MaterialModel,
        path: ScanPath,
        source: ParamSource,
        process: ProcessSettings,
        config: SolverConfig,
    ) -> Result<Self> {
        domain.validate()?;
        material.validate()?;
        config.validate()?;
        if path.points.len() < 2 {
            return Err(Error::InvalidInput("scan path needs at least two points".into()));
        }
        let rhf = match process.rhf {
            Some(cfg) => {
                let cfg = match cfg.reference {
                    Some(_) => cfg,
                    None => cfg.normalized_for(&path)?,
                };
                rhf_profile(&path, &cfg)?
            }
            None => vec![1.0; path.points.len()],
        };
        let seed = match &source {
            ParamSource::Sampled { seed, resample_every, .. } => {
                if *resample_every == 0 {
                    return Err(Error::InvalidInput("resample_every must be positive".into()));
                }
                *seed
            }
            ParamSource::Chain { states, resample_every } => {
                if states.is_empty() || *resample_every == 0 {
                    return Err(Error::InvalidInput("chain source needs states and resample_every > 0".into()));
                }
                0
            }
            ParamSource::Beam(b) => {
                b.validate()?;
                0
            }
            ParamSource::Law(l) => {
                l.validate()?;
                0
            }
        };
        let dt = match config.dt {
            Some(dt) => dt,
            None => stable_dt(&material, domain.dx, config.dt_safety),
        };
        let mut state = ThermalState::initial(&domain, &material, config.mode == SolverMode::Fluid);
        state.time = path.points[0].t;
        let rows = domain.active_rows_for(path.points[0].z).max(state.active_nz);
        state.activate_rows(&domain, &material, rows);
        Ok(Simulation {
            domain,
            material,
            config,
            state,
            dt,
            path,
            source,
            process,
            rhf,
            rng: ChaCha8Rng::seed_from_u64(seed),
            law: None,
            draws: 0,
            ws: EnergyWorkspace::default(),
            trace: Vec::new(),
        })
    }

    /// Switch to a fixed beam from the next step on.
    pub fn set_beam(&mut self, beam: BeamState) -> Result<()> {
        beam.validate()?;
        self.source = ParamSource::Beam(beam);
        self.law = None;
        Ok(())
    }

    pub fn path(&self) -> &ScanPath {
        &self.path
    }

    pub fn finished(&self) -> bool {
        self.state.time >= self.path.duration() - 1e-12 * self.dt
    }

    fn current_law(&mut self) -> Result<Option<StochasticBeamLaw>> {
        let step = self.state.step as usize;
        match &self.source {
            ParamSource::Beam(_) => Ok(None),
            ParamSource::Law(l) => Ok(Some(*l)),
            ParamSource::Sampled { model, resample_every, .. } => {
                if self.law.is_none() || step % resample_every == 0 {
                    let p = mvn_sample(model, &mut self.rng)?;
                    self.law = Some(StochasticBeamLaw::from_array(p)?);
                }
                Ok(self.law)
            }
            ParamSource::Chain { states, resample_every } => {
                if self.law.is_none() || step % resample_every == 0 {
                    let p = states[self.draws % states.len()];
                    self.draws += 1;
                    self.law = Some(StochasticBeamLaw::from_array(p)?);
                }
                Ok(self.law)
            }
        }
    }

    /// Beam state at the current time, with the local residual heat factor.
    fn beam_now(&mut self, t: f64) -> Result<(BeamState, f64)> {
        let law = self.current_law()?;
        let rhf = self.rhf[self.path.nearest_index(t)];
        let beam = match (&self.source, law) {
            (ParamSource::Beam(b), _) => *b,
            (_, Some(law)) => beam_from_law(&law, self.process.power, self.process.speed, rhf)?,
            (_, None) => unreachable!("law-driven source without a law"),
        };
        Ok((beam, rhf))
    }

    /// Advance one time step.
    pub fn step(&mut self) -> Result<()> {
        let t_mid = self.state.time + 0.5 * self.dt;
        let (beam, rhf) = self.beam_now(t_mid)?;
        let pose = self.path.pose_at(t_mid.min(self.path.duration()));
        let lit = pose.filter(|(_, on)| *on).map(|(p, _)| BeamPose { beam, x: p[0], y: p[1] });
        if let Some((p, _)) = pose {
            let rows = self.domain.active_rows_for(p[2]);
            if rows > self.state.active_nz {
                self.state.activate_rows(&self.domain, &self.material, rows);
            }
        }
        if self.config.mode == SolverMode::Fluid {
            step_fluid(&mut self.state, &self.domain, &self.material, self.dt, &self.config)?;
        }
        step_energy_with(&mut self.ws, &mut self.state, &self.domain, &self.material, lit.as_ref(), self.dt, &self.config)?;

        let stride = self.config.trace_stride;
        if stride > 0 && self.state.step % stride as u64 == 0 {
            if let Some((p, _)) = pose {
                let x = p[0] - self.config.trace_lag;
                let dims = extract_meltpool_dims(&self.state, &self.domain, &self.material, x);
                self.trace.push(TracePoint {
                    t: self.state.time,
                    x_beam: p[0],
                    width: dims.width,
                    depth: dims.depth,
                    rhf,
                    absorptivity: beam.absorptivity,
                    radius: beam.radius,
                    source_depth: beam.depth,
                });
            }
        }
        Ok(())
    }

    /// Step until the simulated time reaches `t` (or the path ends).
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let end = t.min(self.path.duration());
        while self.state.time + 0.5 * self.dt <= end {
            self.step()?;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<RunResult> {
        self.advance_to(self.path.duration())?;
        Ok(RunResult { trace: self.trace, state: self.state, dt: self.dt })
    }
}

/// Simulate the whole path.
pub fn run_scan(
    domain: &Domain,
    material: &MaterialModel,
    path: &ScanPath,
    source: ParamSource,
    process: ProcessSettings,
    config: &SolverConfig,
) -> Result<RunResult> {
    if path.is_empty() {
        return Err(Error::InvalidInput("empty scan path".into()));
    }
    Simulation::new(domain.clone(), material.clone(), path.clone(), source, process, config.clone())?.run()
}
