use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::calibrate::{CalibrationConfig, HyperParams};
use crate::control::{CommandBox, ProcessConstants, TrainConfig};
use crate::error::{Error, Result};
use crate::heat_source::{BeamState, PathGeometry, RhfConfig};
use crate::hopgd::SurrogateConfig;
use crate::material::MaterialModel;
use crate::postproc::{QualitySettings, Region};
use crate::solver::{Domain, SolverConfig};
use crate::stats::ChainOptions;

/// `"in625"`, a path to a material JSON file, or an inline material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum MaterialRef {
    Named(String),
    Inline(Box<MaterialModel>),
}

impl Default for MaterialRef {
    fn default() -> Self {
        MaterialRef::Named("in625".into())
    }
}

impl MaterialRef {
    pub fn load(&self, base: &Path) -> Result<MaterialModel> {
        match self {
            MaterialRef::Named(n) if n.eq_ignore_ascii_case("in625") => Ok(MaterialModel::in625()),
            MaterialRef::Named(p) => MaterialModel::load(&base.join(p).to_string_lossy()),
            MaterialRef::Inline(m) => {
                m.validate()?;
                Ok((**m).clone())
            }
        }
    }
}

/// Plate with optional powder rows and build layers; top at z = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// Cell size, m.
    pub dx: f64,
    /// Plate length along x, m.
    pub length: f64,
    /// Full plate width along y, m.
    pub width: f64,
    /// Plate height, m.
    pub height: f64,
    /// Simulate only y ≥ 0 with a mirror plane (single tracks at y = 0).
    #[serde(default)]
    pub symmetric: bool,
    /// Rows of powder at the top of the plate.
    #[serde(default)]
    pub powder_cells: usize,
    /// Powder layers added above the plate.
    #[serde(default)]
    pub layers: usize,
    #[serde(default = "default_layer")]
    pub layer_thickness: f64,
}

fn default_layer() -> f64 {
    4e-5
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        let mut d = Domain::single_track(self.dx, self.length, self.width, self.height, self.symmetric)?;
        if self.powder_cells > 0 {
            d = d.with_powder_top(self.powder_cells);
        }
        if self.layers > 0 {
            d = d.with_layers(self.layers, self.layer_thickness)?;
        }
        Ok(d)
    }
}

/// Power and speed of a scan; speed in mm/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub power_w: f64,
    pub speed_mm_s: f64,
    #[serde(default)]
    pub rhf: Option<RhfConfig>,
}

impl ProcessSpec {
    pub fn speed(&self) -> f64 {
        self.speed_mm_s * 1e-3
    }
}

/// Heat-source parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Fixed beam.
    Beam { beam: BeamState },
    /// Deterministic laws (P1, P2, P3).
    Law { law: [f64; 3] },
    /// Draws from a trivariate normal, refreshed every `resample_every` steps.
    Hyper { hyper: HyperParams, resample_every: usize },
    /// Hyperparameters taken from a calibration result file.
    Calibration { path: PathBuf, resample_every: usize },
    /// Chain states from a CSV written by `sample`.
    Chain { path: PathBuf, resample_every: usize },
}

impl SourceSpec {
    pub fn is_stochastic(&self) -> bool {
        !matches!(self, SourceSpec::Beam { .. } | SourceSpec::Law { .. })
    }

    pub fn referenced_file(&self) -> Option<&Path> {
        match self {
            SourceSpec::Calibration { path, .. } | SourceSpec::Chain { path, .. } => Some(path),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub material: MaterialRef,
    pub domain: DomainSpec,
    pub path: PathGeometry,
    pub process: ProcessSpec,
    pub source: SourceSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Write the final fields as a binary snapshot.
    #[serde(default)]
    pub snapshot: bool,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BuildSurrogateConfig {
    #[serde(default)]
    pub material: MaterialRef,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    /// Surrogate JSON written by `build-surrogate`.
    pub surrogate: PathBuf,
    /// Experiment CSV; the built-in AFRL table when absent.
    #[serde(default)]
    pub cases: Option<PathBuf>,
    /// Starting hyperparameters; an order-of-magnitude guess when absent.
    #[serde(default)]
    pub init: Option<HyperParams>,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    /// Calibration result whose distribution is sampled.
    #[serde(default)]
    pub calibration: Option<PathBuf>,
    /// Explicit distribution, used when no calibration file is given.
    #[serde(default)]
    pub hyper: Option<HyperParams>,
    /// Total chain steps including burn-in.
    pub steps: usize,
    /// Initial proposal standard deviation relative to each component's
    /// standard deviation.
    #[serde(default = "default_relative_scale")]
    pub relative_scale: f64,
    #[serde(default)]
    pub chain: ChainOptions,
    #[serde(default)]
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
}

fn default_relative_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    #[serde(default)]
    pub material: MaterialRef,
    pub domain: DomainSpec,
    pub path: PathGeometry,
    pub process: ProcessSpec,
    pub source: SourceSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub quality: QualitySettings,
    /// Nominal build region; the powder volume under the scanned area when
    /// absent.
    #[serde(default)]
    pub region: Option<Region>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TrainControlConfig {
    pub surrogate: PathBuf,
    #[serde(default)]
    pub plant: PlantSpec,
    #[serde(default)]
    pub commands: CommandBox,
    #[serde(default = "default_traces")]
    pub traces: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
}

fn default_traces() -> usize {
    30
}

fn default_steps() -> usize {
    120
}

fn default_window() -> usize {
    crate::control::WINDOW
}

/// Process constants and lag of the surrogate-backed plant; speed in mm/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSpec {
    pub speed_mm_s: f64,
    pub nominal_power_w: f64,
    pub hatch: f64,
    pub layer: f64,
    pub lag: f64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        PlantSpec { speed_mm_s: 1230.0, nominal_power_w: 300.0, hatch: 1e-4, layer: 4e-5, lag: 0.5 }
    }
}

impl PlantSpec {
    pub fn constants(&self, m: &MaterialModel) -> ProcessConstants {
        ProcessConstants {
            speed: self.speed_mm_s * 1e-3,
            nominal_power: self.nominal_power_w,
            hatch: self.hatch,
            layer: self.layer,
            ..ProcessConstants::for_material(m)
        }
    }
}

/// Width held fixed while depth follows a logistic step, m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Sigmoid { width: f64, depth_from: f64, depth_to: f64, steps: usize, steepness: f64 },
    Points { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    /// Model JSON written by `train-control`.
    pub model: PathBuf,
    pub surrogate: PathBuf,
    #[serde(default)]
    pub plant: PlantSpec,
    pub target: TargetSpec,
    pub output_dir: PathBuf,
}

/// Resolve `p` against the directory of the config file.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parse a config, reporting the line and column of malformed JSON.
pub fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
}
