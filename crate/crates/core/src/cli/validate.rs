use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::config::*;
use super::CommandKind;
use crate::error::{Error, Result};
use crate::heat_source::{generate_path, PathGeometry};

/// Outcome of `validate`: hard errors and unit/sanity warnings.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Report {
    fn check(&mut self, r: Result<()>) {
        if let Err(e) = r {
            self.errors.push(e.to_string());
        }
    }
}

/// Check a config without running it. Only an unreadable file is an `Err`;
/// everything else lands in the report.
pub fn validate_config(kind: CommandKind, path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(validate_text(kind, &text, &base))
}

pub(crate) fn validate_text(kind: CommandKind, text: &str, base: &Path) -> Report {
    let mut r = Report { command: kind.name().into(), ..Default::default() };
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            r.errors.push(format!("malformed JSON at line {} column {}: {e}", e.line(), e.column()));
            return r;
        }
    };
    unit_warnings(&value, "", &mut r.warnings);
    match kind {
        CommandKind::Simulate => typed::<SimulateConfig>(&value, &mut r, |c, r| {
            seed(c.source.is_stochastic(), c.seed, r);
            scan(&c.material, &c.domain, &c.path, &c.process, &c.source, base, r);
            r.check(c.solver.validate());
        }),
        CommandKind::BuildSurrogate => typed::<BuildSurrogateConfig>(&value, &mut r, |c, r| {
            material(&c.material, base, r);
            let fit = &c.surrogate.fit;
            if !(fit.tol > 0.0 && fit.max_modes > 0 && fit.max_sweeps > 0) {
                r.errors.push("surrogate.fit needs positive tol, max_modes and max_sweeps".into());
            }
            r.check(c.surrogate.solver.validate());
            if c.surrogate.levels.iter().any(|&l| l < 2) {
                r.errors.push("surrogate levels need at least 2 nodes per axis".into());
            }
        }),
        CommandKind::Calibrate => typed::<CalibrateConfig>(&value, &mut r, |c, r| {
            seed(true, c.seed, r);
            file(base, &c.surrogate, "surrogate", r);
            if let Some(p) = &c.cases {
                file(base, p, "cases", r);
            }
            if let Some(h) = &c.init {
                r.check(h.validate());
            }
            r.check(c.calibration.propagation.validate());
            if c.calibration.max_evaluations == 0 {
                r.errors.push("calibration.max_evaluations must be positive".into());
            }
        }),
        CommandKind::Sample => typed::<SampleConfig>(&value, &mut r, |c, r| {
            seed(true, c.seed, r);
            match (&c.calibration, &c.hyper) {
                (Some(p), _) => file(base, p, "calibration", r),
                (None, Some(h)) => r.check(h.validate()),
                (None, None) => r.errors.push("sample needs `calibration` or `hyper`".into()),
            }
            if c.steps == 0 {
                r.errors.push("steps must be positive".into());
            }
            if !(c.relative_scale > 0.0) {
                r.errors.push("relative_scale must be positive".into());
            }
        }),
        CommandKind::Predict => typed::<PredictConfig>(&value, &mut r, |c, r| {
            seed(c.source.is_stochastic(), c.seed, r);
            scan(&c.material, &c.domain, &c.path, &c.process, &c.source, base, r);
            r.check(c.solver.validate());
            let q = &c.quality;
            if !(q.n_zones > 0 && q.beam_diameter > 0.0 && q.layer_thickness > 0.0 && q.hatch > 0.0) {
                r.errors.push("quality settings must be positive".into());
            }
            if let Some(reg) = &c.region {
                if !(0..3).all(|a| reg.lo[a] < reg.hi[a]) {
                    r.errors.push("region.lo must be below region.hi on every axis".into());
                }
            }
            if c.domain.powder_cells == 0 && c.domain.layers == 0 {
                r.warnings.push("domain has no powder; porosity will be zero".into());
            }
        }),
        CommandKind::TrainControl => typed::<TrainControlConfig>(&value, &mut r, |c, r| {
            seed(true, c.seed, r);
            file(base, &c.surrogate, "surrogate", r);
            plant(&c.plant, r);
            r.check(c.train.validate());
            if c.traces < 3 || c.steps <= c.window || c.window == 0 {
                r.errors.push("need traces ≥ 3, window ≥ 1 and steps > window".into());
            }
        }),
        CommandKind::Control => typed::<ControlConfig>(&value, &mut r, |c, r| {
            file(base, &c.model, "model", r);
            file(base, &c.surrogate, "surrogate", r);
            plant(&c.plant, r);
            match &c.target {
                TargetSpec::Sigmoid { width, depth_from, depth_to, steps, .. } => {
                    if !(*width > 0.0 && *depth_from > 0.0 && *depth_to > 0.0 && *steps > 0) {
                        r.errors.push("sigmoid target needs positive width, depths and steps".into());
                    }
                }
                TargetSpec::Points { points } => {
                    if points.is_empty() || points.iter().flatten().any(|v| !(*v > 0.0)) {
                        r.errors.push("target points must be non-empty and positive".into());
                    }
                }
            }
        }),
    }
    r
}

fn typed<T: serde::de::DeserializeOwned>(value: &Value, r: &mut Report, then: impl FnOnce(&T, &mut Report)) {
    match T::deserialize(value) {
        Ok(c) => then(&c, r),
        Err(e) => r.errors.push(format!("invalid config: {e}")),
    }
}

fn seed(required: bool, seed: Option<u64>, r: &mut Report) {
    if required && seed.is_none() {
        r.errors.push("missing required field `seed` for a stochastic command".into());
    }
}

fn file(base: &Path, p: &PathBuf, what: &str, r: &mut Report) {
    let full = resolve(base, p);
    if !full.is_file() {
        r.errors.push(format!("{what} file {} does not exist", full.display()));
    }
}

fn material(m: &MaterialRef, base: &Path, r: &mut Report) {
    r.check(m.load(base).map(|_| ()));
}

fn scan(
    m: &MaterialRef,
    d: &DomainSpec,
    g: &PathGeometry,
    p: &ProcessSpec,
    s: &SourceSpec,
    base: &Path,
    r: &mut Report,
) {
    material(m, base, r);
    r.check(d.build().map(|_| ()));
    if !(p.power_w > 0.0 && p.speed_mm_s > 0.0) {
        r.errors.push("process power and speed must be positive".into());
    } else {
        r.check(generate_path(g, p.speed(), d.dx / p.speed(), None).map(|_| ()));
        let end = g.start[0] + g.track_length;
        if g.start[0] < 0.0 || end > d.length {
            r.warnings.push(format!("scan x-range [{}, {end}] leaves the plate [0, {}]", g.start[0], d.length));
        }
    }
    match s {
        SourceSpec::Beam { beam } => r.check(beam.validate()),
        SourceSpec::Law { law } => r.check(crate::heat_source::StochasticBeamLaw::from_array(*law).map(|_| ())),
        SourceSpec::Hyper { resample_every, .. } | SourceSpec::Calibration { resample_every, .. } | SourceSpec::Chain { resample_every, .. } => {
            if *resample_every == 0 {
                r.errors.push("source.resample_every must be positive".into());
            }
        }
    }
    if let SourceSpec::Hyper { hyper, .. } = s {
        // A zero covariance is allowed: it reproduces the deterministic laws.
        if hyper.mean.iter().any(|v| !(*v > 0.0)) {
            r.errors.push("hyper.mean must be positive".into());
        }
    }
    if let Some(f) = s.referenced_file() {
        file(base, &f.to_path_buf(), "source", r);
    }
}

fn plant(p: &PlantSpec, r: &mut Report) {
    if !(p.lag >= 0.0 && p.lag < 1.0) {
        r.errors.push("plant.lag must lie in [0, 1)".into());
    }
    if !(p.nominal_power_w > 0.0 && p.speed_mm_s > 0.0 && p.hatch > 0.0 && p.layer > 0.0) {
        r.errors.push("plant constants must be positive".into());
    }
}

/// Speeds in the wrong unit are the most common config slip.
fn unit_warnings(v: &Value, at: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let here = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                if let Some(n) = x.as_f64() {
                    if k.ends_with("_mm_s") && n > 0.0 && n < 10.0 {
                        out.push(format!("{here} = {n} looks like m/s; this field is in mm/s"));
                    } else if (k == "speed" || k == "v_ref") && n > 100.0 {
                        out.push(format!("{here} = {n} looks like mm/s; this field is in m/s"));
                    }
                }
                unit_warnings(x, &here, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                unit_warnings(x, &format!("{at}[{i}]"), out);
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_json_reports_position() {
        let r = validate_text(CommandKind::Sample, "{\n  \"steps\": 10,\n  oops\n}", Path::new("."));
        assert_eq!(r.errors.len(), 1);
        assert!(r.errors[0].contains("line 3"), "{}", r.errors[0]);
    }

    #[test]
    fn missing_seed_is_named() {
        let r = validate_text(
            CommandKind::Sample,
            r#"{"hyper": {"mean": [4e-7, 2e-3, 2e-7], "chol": [[2e-8,0,0],[0,1e-4,0],[0,0,1e-8]]}, "steps": 10, "output_dir": "o"}"#,
            Path::new("."),
        );
        assert!(r.errors.iter().any(|e| e.contains("`seed`")), "{:?}", r.errors);
    }

    #[test]
    fn speed_unit_warning() {
        let mut w = Vec::new();
        unit_warnings(&serde_json::json!({"process": {"speed_mm_s": 1.23}, "plant": {"speed": 1230.0}}), "", &mut w);
        assert_eq!(w.len(), 2);
        assert!(w[0].contains("process.speed_mm_s") || w[1].contains("process.speed_mm_s"));
    }
}
