use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::*;
use super::CommandKind;
use crate::calibrate::{builtin_afrl, calibrate, cases_from_csv, initial_guess, CalibrationResult};
use crate::control::{
    build_dataset, closed_loop, evaluate, generate_traces, loop_csv, loss_csv, sigmoid_targets, train, Command,
    ControlModel, SurrogatePlant,
};
use crate::error::{Error, Result};
use crate::hash::settings_hash;
use crate::heat_source::{generate_path, ScanPath, StochasticBeamLaw, MIN_ABSORPTIVITY};
use crate::hopgd::{SolverSampler, Surrogate};
use crate::material::MaterialModel;
use crate::postproc::{quality_report, top_surface, Region};
use crate::solver::{
    run_scan, steady_dims, trace_to_csv, write_snapshot, Domain, ParamSource, ProcessSettings, RunResult, Simulation,
};
use crate::stats::{mh_chain, TriNormal};

/// Output directory of one command; every artifact carries the config hash
/// and seed.
pub struct Artifacts {
    dir: PathBuf,
    pub config_hash: String,
    pub seed: Option<u64>,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path, config_hash: String, seed: Option<u64>) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), config_hash, seed, written: Vec::new() })
    }

    fn target(&mut self, name: &str) -> Result<PathBuf> {
        if name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(Error::InvalidInput(format!("artifact name {name:?} must be a plain file name")));
        }
        let p = self.dir.join(name);
        self.written.push(p.clone());
        Ok(p)
    }

    fn header(&self, units: &str) -> String {
        let seed = self.seed.map(|s| format!(" seed={s}")).unwrap_or_default();
        let units = if units.is_empty() { String::new() } else { format!(" units: {units}") };
        format!("# config_hash={}{seed}{units}\n", self.config_hash)
    }

    /// JSON object with `config_hash` and `seed` added at top level.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        match &mut v {
            Value::Object(map) => {
                map.insert("config_hash".into(), json!(self.config_hash));
                map.insert("seed".into(), json!(self.seed));
            }
            other => {
                *other = json!({ "config_hash": self.config_hash, "seed": self.seed, "data": other.take() });
            }
        }
        let path = self.target(name)?;
        std::fs::write(path, serde_json::to_string_pretty(&v)? + "\n")?;
        Ok(())
    }

    /// CSV prefixed by a `#` provenance line listing column units.
    pub fn write_csv(&mut self, name: &str, units: &str, body: &str) -> Result<()> {
        let text = self.header(units) + body;
        let path = self.target(name)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Strip `#` comment lines from an artifact CSV.
pub(crate) fn strip_comments(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

fn read(base: &Path, p: &Path) -> Result<String> {
    let full = resolve(base, p);
    std::fs::read_to_string(&full).map_err(|e| Error::Config(format!("cannot read {}: {e}", full.display())))
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| Error::Config("missing required field `seed` for a stochastic command".into()))
}

pub fn schema(kind: CommandKind) -> String {
    let s = match kind {
        CommandKind::Simulate => schemars::schema_for!(SimulateConfig),
        CommandKind::BuildSurrogate => schemars::schema_for!(BuildSurrogateConfig),
        CommandKind::Calibrate => schemars::schema_for!(CalibrateConfig),
        CommandKind::Sample => schemars::schema_for!(SampleConfig),
        CommandKind::Predict => schemars::schema_for!(PredictConfig),
        CommandKind::TrainControl => schemars::schema_for!(TrainControlConfig),
        CommandKind::Control => schemars::schema_for!(ControlConfig),
    };
    serde_json::to_string_pretty(&s).expect("schema serializes")
}

/// Run one command from its config file; returns the artifacts written.
pub fn run_command(kind: CommandKind, config_path: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let value: Value = parse(&text)?;
    let hash = settings_hash(&value)?;
    match kind {
        CommandKind::Simulate => simulate(&parse(&text)?, &base, hash),
        CommandKind::BuildSurrogate => build_surrogate(&parse(&text)?, &base, hash),
        CommandKind::Calibrate => run_calibrate(&parse(&text)?, &base, hash),
        CommandKind::Sample => sample(&parse(&text)?, &base, hash),
        CommandKind::Predict => predict(&parse(&text)?, &base, hash),
        CommandKind::TrainControl => train_control(&parse(&text)?, &base, hash),
        CommandKind::Control => control(&parse(&text)?, &base, hash),
    }
}

/// Chain states from a `sample` CSV.
pub(crate) fn read_chain_csv(text: &str) -> Result<Vec<[f64; 3]>> {
    let body = strip_comments(text);
    let mut lines = body.lines();
    if lines.next().map(str::trim) != Some("P1,P2,P3") {
        return Err(Error::InvalidInput("chain CSV must start with `P1,P2,P3`".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("chain CSV: {e}"))))
                .collect::<Result<_>>()?;
            <[f64; 3]>::try_from(v).map_err(|_| Error::InvalidInput("chain CSV rows need 3 columns".into()))
        })
        .collect()
}

fn load_calibration(base: &Path, p: &Path) -> Result<CalibrationResult> {
    CalibrationResult::from_json(&read(base, p)?)
}

/// Parameter source plus the mean law (absent for fixed beams).
fn param_source(spec: &SourceSpec, base: &Path, seed: Option<u64>) -> Result<(ParamSource, Option<[f64; 3]>)> {
    Ok(match spec {
        SourceSpec::Beam { beam } => (ParamSource::Beam(*beam), None),
        SourceSpec::Law { law } => (ParamSource::Law(StochasticBeamLaw::from_array(*law)?), Some(*law)),
        SourceSpec::Hyper { hyper, resample_every } => {
            let seed = require_seed(seed)?;
            (ParamSource::Sampled { model: *hyper, seed, resample_every: *resample_every }, Some(hyper.mean))
        }
        SourceSpec::Calibration { path, resample_every } => {
            let seed = require_seed(seed)?;
            let hyper = load_calibration(base, path)?.hyper;
            (ParamSource::Sampled { model: hyper, seed, resample_every: *resample_every }, Some(hyper.mean))
        }
        SourceSpec::Chain { path, resample_every } => {
            let states = read_chain_csv(&read(base, path)?)?;
            let n = states.len().max(1) as f64;
            let mean = [0, 1, 2].map(|i| states.iter().map(|s| s[i]).sum::<f64>() / n);
            (ParamSource::Chain { states, resample_every: *resample_every }, Some(mean))
        }
    })
}

struct ScanSetup {
    material: MaterialModel,
    domain: Domain,
    path: ScanPath,
    source: ParamSource,
    mean_law: Option<[f64; 3]>,
    process: ProcessSettings,
}

fn scan_setup(
    material: &MaterialRef,
    domain: &DomainSpec,
    geometry: &crate::heat_source::PathGeometry,
    process: &ProcessSpec,
    source: &SourceSpec,
    seed: Option<u64>,
    base: &Path,
) -> Result<ScanSetup> {
    let material = material.load(base)?;
    let domain = domain.build()?;
    let speed = process.speed();
    let path = generate_path(geometry, speed, domain.dx / speed, None)?;
    let (source, mean_law) = param_source(source, base, seed)?;
    Ok(ScanSetup {
        material,
        domain,
        path,
        source,
        mean_law,
        process: ProcessSettings { power: process.power_w, speed, rhf: process.rhf },
    })
}

/// Stepper for a `simulate` config; relative paths resolve against `base`.
pub fn simulation_from_config(cfg: &SimulateConfig, base: &Path) -> Result<Simulation> {
    let seed = if cfg.source.is_stochastic() { Some(require_seed(cfg.seed)?) } else { cfg.seed };
    let s = scan_setup(&cfg.material, &cfg.domain, &cfg.path, &cfg.process, &cfg.source, seed, base)?;
    Simulation::new(s.domain, s.material, s.path, s.source, s.process, cfg.solver.clone())
}

fn simulate(cfg: &SimulateConfig, base: &Path, hash: String) -> Result<Vec<PathBuf>> {
    let seed = if cfg.source.is_stochastic() { Some(require_seed(cfg.seed)?) } else { cfg.seed };
    let sim = simulation_from_config(cfg, base)?;
    let (domain, material) = (sim.domain.clone(), sim.material.clone());
    let mut out = Artifacts::new(&resolve(base, &cfg.output_dir), hash, seed)?;
    let run = sim.run()?;
    out.write_csv("trace.csv", "t=s x_beam=m W=m D=m RHF=1 eta=1 r_b=m d=m", &trace_to_csv(&run.trace))?;
    let report = scan_report(&run, &domain, &material, &cfg.path)?;
    out.write_json("report.json", &report)?;
    if cfg.snapshot {
        write_snapshot(out.dir(), "final", &run.state, &domain)?;
        out.written.push(out.dir().join("final.bin"));
        // Re-emit the metadata with the provenance keys.
        let meta: Value = serde_json::from_str(&std::fs::read_to_string(out.dir().join("final.json"))?)?;
        out.write_json("final.json", &meta)?;
    }
    Ok(out.written)
}

fn scan_report(run: &RunResult, domain: &Domain, m: &MaterialModel, g: &crate::heat_source::PathGeometry) -> Result<Value> {
    let (x0, len) = (g.start[0], g.track_length);
    let steady = steady_dims(&run.state, domain, m, x0 + 0.5 * len, x0 + 0.8 * len).ok();
    Ok(json!({
        "steps": run.state.step,
        "dt": run.dt,
        "final_time": run.state.time,
        "max_peak_temperature": run.state.peak_temperature.iter().copied().fold(f64::MIN, f64::max),
        "steady_width": steady.as_ref().map(|d| d.width),
        "steady_depth": steady.as_ref().map(|d| d.depth),
        "units": { "width": "m", "depth": "m", "dt": "s", "temperature": "K" },
    }))
}

fn build_surrogate(cfg: &BuildSurrogateConfig, base: &Path, hash: String) -> Result<Vec<PathBuf>> {
    let material = cfg.material.load(base)?;
    let mut out = Artifacts::new(&resolve(base, &cfg.output_dir), hash, None)?;
    let sampler = SolverSampler::new(material, cfg.surrogate.clone())?;
    let (mut surrogate, grid) = Surrogate::build(&sampler)?;
    surrogate.provenance.config_hash = out.config_hash.clone();
    out.write_json("surrogate.json", &surrogate)?;
    out.write_json("samples.json", &grid)?;
    Ok(out.written)
}

fn run_calibrate(cfg: &CalibrateConfig, base: &Path, hash: String) -> Result<Vec<PathBuf>> {
    let seed = require_seed(cfg.seed)?;
    let surrogate = Surrogate::from_json(&read(base, &cfg.surrogate)?)?;
    let cases = match &cfg.cases {
        Some(p) => cases_from_csv(&read(base, p)?)?,
        None => builtin_afrl(),
    };
    let init = cfg.init.unwrap_or_else(initial_guess);
    let mut settings = cfg.calibration.clone();
    settings.propagation.seed = seed;
    let mut out = Artifacts::new(&resolve(base, &cfg.output_dir), hash, Some(seed))?;
    let result = calibrate(&init, &surrogate, &cases, &settings)?;
    out.write_json("calibration.json", &result)?;
    Ok(out.written)
}

fn sample(cfg: &SampleConfig, base: &Path, hash: String) -> Result<Vec<PathBuf>> {
    let seed = require_seed(cfg.seed)?;
    let hyper: TriNormal = match (&cfg.calibration, &cfg.hyper) {
        (Some(p), _) => load_calibration(base, p)?.hyper,
        (None, Some(h)) => *h,
        (None, None) => return Err(Error::Config("sample needs `calibration` or `hyper`".into())),
    };
    hyper.validate()?;
    if !(cfg.relative_scale > 0.0) {
        return Err(Error::Config("relative_scale must be positive".into()));
    }
    let scale = hyper.std_devs().map(|s| s * cfg.relative_scale);
    let mut out = Artifacts::new(&resolve(base, &cfg.output_dir), hash, Some(seed))?;
    let target = |x: &[f64; 3]| if hyper.admissible(x) { hyper.log_pdf(x) } else { f64::NEG_INFINITY };
    let chain = mh_chain(target, hyper.mean, cfg.steps, scale, seed, cfg.chain)?;
    let mut csv = String::from("P1,P2,P3\n");
    for s in &chain.states {
        csv.push_str(&format!("{:e},{:e},{:e}\n", s[0], s[1], s[2]));
    }
    out.write_csv("chain.csv", "P1=m^2/J P2=m/J P3=m^2/J", &csv)?;
    out.write_json(
        "chain_summary.json",
        &json!({
            "samples": chain.states.len(),
            "acceptance_rate": chain.acceptance_rate,
            "proposal_scale": chain.proposal_scale,
            "mean": chain.mean(),
        }),
    )?;
    Ok(out.written)
}

/// Powder volume under the scanned area.
fn default_region(cfg: &PredictConfig, domain: &Domain) -> Region {
    let g = &cfg.path;
    let d = &cfg.domain;
    let y_hi = g.start[1] + (g.n_tracks.saturating_sub(1)) as f64 * g.hatch;
    let ext = domain.extent();
    Region {
        lo: [
            g.start[0] + 0.1 * g.track_length,
            (g.start[1] - 0.5 * g.hatch).max(domain.origin[1]),
            domain.z_top - d.powder_cells as f64 * d.dx,
        ],
        hi: [
            g.start[0] + 0.9 * g.track_length,
            (y_hi + 0.5 * g.hatch).min(domain.origin[1] + ext[1]),
            domain.z_top + d.layers as f64 * d.layer_thickness,
        ],
    }
}

fn predict(cfg: &PredictConfig, base: &Path, hash: String) -> Result<Vec<PathBuf>> {
    let seed = if cfg.source.is_stochastic() { Some(require_seed(cfg.seed)?) } else { cfg.seed };
    let s = scan_setup(&cfg.material, &cfg.domain, &cfg.path, &cfg.process, &cfg.source, seed, base)?;
    let region = cfg.region.unwrap_or_else(|| default_region(cfg, &s.domain));
    let absorptivity = match (&cfg.source, s.mean_law) {
        (SourceSpec::Beam { beam }, _) => beam.absorptivity,
        (_, Some(law)) => (law[1] * s.process.power / s.process.speed).clamp(MIN_ABSORPTIVITY, 1.0),
        (_, None) => MIN_ABSORPTIVITY,
    };
    let process = (s.process.power, s.process.speed, absorptivity);
    let mut out = Artifacts::new(&resolve(base, &cfg.output_dir), hash, seed)?;
    let run = run_scan(&s.domain, &s.material, &s.path, s.source, s.process, &cfg.solver)?;
    let report = quality_report(&run.state, &s.domain, &s.material, &region, process, &cfg.quality)?;
    let field = top_surface(&run.state, &s.domain, &s.material)?;
    out.write_json("quality.json", &report)?;
    out.write_csv("height.csv", "y=m x=m height=m", &field.to_csv())?;
    out.write_csv("trace.csv", "t=s x_beam=m W=m D=m RHF=1 eta=1 r_b=m d=m", &trace_to_csv(&run.trace))?;
    Ok(out.written)
}

fn train_control(cfg: &TrainControlConfig, base: &Path, hash: String) -> Result<Vec<PathBuf>> {
    let seed = require_seed(cfg.seed)?;
    let surrogate = Surrogate::from_json(&read(base, &cfg.surrogate)?)?;
    let constants = cfg.plant.constants(&MaterialModel::in625());
    let mut out = Artifacts::new(&resolve(base, &cfg.output_dir), hash, Some(seed))?;
    let traces = generate_traces(
        |c| SurrogatePlant::new(&surrogate, constants, cfg.plant.lag, c),
        &cfg.commands,
        cfg.traces,
        cfg.steps,
        seed,
    )?;
    let ds = build_dataset(&traces, cfg.window, seed)?;
    let tc = crate::control::TrainConfig { seed, ..cfg.train.clone() };
    let (model, curve) = train(&ds, &tc)?;
    let eval = evaluate(&model, &ds.test)?;
    out.write_json("control_model.json", &model)?;
    out.write_csv("loss.csv", "", &loss_csv(&curve))?;
    out.write_json(
        "evaluation.json",
        &json!({ "test_rows": ds.test.len(), "mean_relative_error": eval.mean, "max_relative_error": eval.max, "excluded": eval.excluded }),
    )?;
    Ok(out.written)
}

fn control(cfg: &ControlConfig, base: &Path, hash: String) -> Result<Vec<PathBuf>> {
    let model = ControlModel::from_json(&read(base, &cfg.model)?)?;
    let surrogate = Surrogate::from_json(&read(base, &cfg.surrogate)?)?;
    let constants = cfg.plant.constants(&MaterialModel::in625());
    let mid: Vec<f64> = model.target_norm.lo.iter().zip(&model.target_norm.hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let start = Command { ned: mid[0], radius: mid[1], depth: mid[2] };
    let mut plant = SurrogatePlant::new(&surrogate, constants, cfg.plant.lag, &start)?;
    let targets = match &cfg.target {
        TargetSpec::Sigmoid { width, depth_from, depth_to, steps, steepness } => {
            sigmoid_targets(*width, *depth_from, *depth_to, *steps, *steepness)
        }
        TargetSpec::Points { points } => points.clone(),
    };
    let mut out = Artifacts::new(&resolve(base, &cfg.output_dir), hash, None)?;
    let steps = closed_loop(&model, &mut plant, &targets)?;
    out.write_csv("loop.csv", "W_target=m D_target=m NED=1 r_b=m d=m W=m D=m", &loop_csv(&steps))?;
    let max = steps.iter().map(|s| s.discrepancy).fold(0.0, f64::max);
    let mean = steps.iter().map(|s| s.discrepancy).sum::<f64>() / steps.len().max(1) as f64;
    out.write_json("loop_summary.json", &json!({ "steps": steps.len(), "max_aspect_discrepancy": max, "mean_aspect_discrepancy": mean }))?;
    Ok(out.written)
}
