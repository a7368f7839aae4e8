//! Transient melt-pool simulation on a structured voxel grid.

mod domain;
mod energy;
mod fluid;
mod io;
mod meltpool;
mod run;
mod state;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use domain::Domain;
pub use energy::{stable_dt, step_energy, BeamPose};
pub use fluid::step_fluid;
pub use io::{read_snapshot, trace_to_csv, write_snapshot, SnapshotMeta};
pub use meltpool::{extract_meltpool_dims, extract_meltpool_dims_with, steady_dims, MeltPoolDims};
pub use run::{run_scan, ParamSource, ProcessSettings, RunResult, Simulation, TracePoint};
pub use state::{enthalpy_from_temperature, temperature_from_enthalpy, ThermalState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    #[default]
    Conduction,
    Fluid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// Fraction of the explicit stability limit scaled so that 0.5 is the
    /// limit itself.
    pub dt_safety: f64,
    /// Explicit step override; must not exceed the stable step.
    pub dt: Option<f64>,
    /// Temperatures above this abort the run, K.
    pub max_temperature_cap: f64,
    /// Steps between field snapshots (0 disables them).
    pub snapshot_stride: usize,
    /// Steps between trace rows (0 disables the trace).
    pub trace_stride: usize,
    /// Distance behind the beam of the traced cross-section, m.
    pub trace_lag: f64,
    /// Convection and radiation from the top surface.
    pub boundary_losses: bool,
    pub projection_max_iter: usize,
    pub projection_tolerance: f64,
    /// Velocities beyond this are treated as a flow blow-up, m/s.
    pub max_velocity: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SolverMode::Conduction,
            dt_safety: 0.25,
            dt: None,
            max_temperature_cap: 1.0e5,
            snapshot_stride: 0,
            trace_stride: 10,
            trace_lag: 1.0e-4,
            boundary_losses: true,
            projection_max_iter: 5000,
            projection_tolerance: 1e-8,
            max_velocity: 100.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_safety > 0.0 && self.dt_safety <= 0.5) {
            return Err(Error::InvalidInput(format!("dt_safety must lie in (0, 0.5], got {}", self.dt_safety)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.max_temperature_cap > 0.0) {
            return Err(Error::InvalidInput("max_temperature_cap must be positive".into()));
        }
        Ok(())
    }
}
