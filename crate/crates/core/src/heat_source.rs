//! Cylindrical Gaussian heat source, the stochastic parameter laws that
//! drive it, the residual heat factor and scan-path generation.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound on absorptivity produced by the parameter laws.
pub const MIN_ABSORPTIVITY: f64 = 0.28;

/// Instantaneous heat-source parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct BeamState {
    /// Laser power, W.
    pub power: f64,
    /// Scan speed, m/s.
    pub speed: f64,
    pub absorptivity: f64,
    /// Gaussian radius r_b, m.
    pub radius: f64,
    /// Cylinder depth d, m.
    pub depth: f64,
}

impl BeamState {
    pub fn validate(&self) -> Result<()> {
        let ok = self.power >= 0.0
            && self.speed > 0.0
            && self.absorptivity > 0.0
            && self.absorptivity <= 1.0
            && self.radius > 0.0
            && self.depth > 0.0
            && [self.power, self.speed, self.radius, self.depth].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid beam state {self:?}")))
        }
    }

    /// Absorbed power ηP, W.
    pub fn absorbed_power(&self) -> f64 {
        self.absorptivity * self.power
    }

    /// Peak volumetric intensity on the beam axis, W/m³.
    pub fn peak_intensity(&self) -> f64 {
        2.0 * self.power * self.absorptivity / (PI * self.radius * self.radius * self.depth)
    }
}

/// Volumetric heat flux of the cylindrical source, W/m³.
///
/// `x_b`, `y_b` are coordinates in the frame moving with the beam and
/// `depth_below_top` is `z_top - z`.
pub fn volumetric_flux(beam: &BeamState, x_b: f64, y_b: f64, depth_below_top: f64) -> f64 {
    if depth_below_top > beam.depth || depth_below_top < 0.0 {
        return 0.0;
    }
    let r2 = x_b * x_b + y_b * y_b;
    beam.peak_intensity() * (-2.0 * r2 / (beam.radius * beam.radius)).exp()
}

/// Coefficients (P1, P2, P3) tying depth, absorptivity and radius to P/V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochasticBeamLaw {
    /// Source depth per unit P/V, m/(J/m).
    pub p1: f64,
    /// Absorptivity per unit P/V, 1/(J/m).
    pub p2: f64,
    /// Source radius per unit P/V, m/(J/m).
    pub p3: f64,
}

impl StochasticBeamLaw {
    pub fn new(p1: f64, p2: f64, p3: f64) -> Result<Self> {
        let law = StochasticBeamLaw { p1, p2, p3 };
        law.validate()?;
        Ok(law)
    }

    pub fn from_array(p: [f64; 3]) -> Result<Self> {
        Self::new(p[0], p[1], p[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p1, self.p2, self.p3]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("P1", self.p1), ("P2", self.p2), ("P3", self.p3)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidLaw(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Heat-source parameters from the laws, coupled to the normalized residual
/// heat factor through its square. Use `rhf_normalized = 1` without path
/// context. Absorptivity is clamped to `[0.28, 1]`.
pub fn beam_from_law(
    law: &StochasticBeamLaw,
    power: f64,
    speed: f64,
    rhf_normalized: f64,
) -> Result<BeamState> {
    law.validate()?;
    if !(power > 0.0 && speed > 0.0 && power.is_finite() && speed.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "power and speed must be positive (P={power}, V={speed})"
        )));
    }
    if !(rhf_normalized > 0.0 && rhf_normalized.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "normalized residual heat factor must be positive, got {rhf_normalized}"
        )));
    }
    let scale = power / speed * rhf_normalized * rhf_normalized;
    Ok(BeamState {
        power,
        speed,
        absorptivity: (law.p2 * scale).clamp(MIN_ABSORPTIVITY, 1.0),
        radius: law.p3 * scale,
        depth: law.p1 * scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Top-surface height of the layer being scanned.
    pub z: f64,
    pub laser_on: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPath {
    pub points: Vec<PathPoint>,
    pub dwell_between_layers: f64,
    /// Set when the point spacing is coarser than the beam radius.
    #[serde(default)]
    pub resolution_warning: bool,
}

/// Scan pattern within one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScanPattern {
    /// Every track runs in +x.
    Unidirectional,
    /// Alternating track direction.
    #[default]
    Serpentine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PathGeometry {
    pub track_length: f64,
    pub n_tracks: usize,
    pub hatch: f64,
    pub n_layers: usize,
    pub layer_thickness: f64,
    /// Start of the first track, with z the top of the first layer.
    #[serde(default)]
    pub start: [f64; 3],
    #[serde(default = "default_dwell")]
    pub dwell: f64,
    /// Defaults to unidirectional for single-track layers, serpentine otherwise.
    #[serde(default)]
    pub pattern: Option<ScanPattern>,
}

fn default_dwell() -> f64 {
    5.0e-4
}

impl PathGeometry {
    pub fn single_track(track_length: f64, start: [f64; 3]) -> Self {
        PathGeometry {
            track_length,
            n_tracks: 1,
            hatch: 1.0e-4,
            n_layers: 1,
            layer_thickness: 4.0e-5,
            start,
            dwell: default_dwell(),
            pattern: None,
        }
    }
}

/// Number of tracks needed to cover `width` at the given hatch spacing.
pub fn tracks_for_width(width: f64, hatch: f64) -> usize {
    (width / hatch).round().max(1.0) as usize
}

/// Discretize a scan strategy into timed points spaced `V·Δt` along tracks.
///
/// `beam_radius`, when given, raises `resolution_warning` if `V·Δt`
/// exceeds it.
pub fn generate_path(
    geometry: &PathGeometry,
    speed: f64,
    dt: f64,
    beam_radius: Option<f64>,
) -> Result<ScanPath> {
    let g = geometry;
    let dims_ok = g.track_length > 0.0
        && g.n_tracks >= 1
        && g.n_layers >= 1
        && (g.n_tracks == 1 || g.hatch > 0.0)
        && (g.n_layers == 1 || g.layer_thickness > 0.0)
        && g.dwell >= 0.0
        && speed > 0.0
        && dt > 0.0;
    if !dims_ok {
        return Err(Error::InvalidInput(format!("invalid path geometry {g:?} (V={speed}, dt={dt})")));
    }
    let pattern = g.pattern.unwrap_or(if g.n_tracks == 1 {
        ScanPattern::Unidirectional
    } else {
        ScanPattern::Serpentine
    });
    let steps_per_track = ((g.track_length / (speed * dt)).round() as usize).max(1);
    let dt_track = g.track_length / speed / steps_per_track as f64;

    let mut points: Vec<PathPoint> = Vec::new();
    let mut t = 0.0;
    let [x0, y0, z0] = g.start;
    let push_transit = |points: &mut Vec<PathPoint>, t: &mut f64, to: [f64; 3], duration: f64| {
        let from = *points.last().expect("transit after a track");
        let n = ((duration / dt).ceil() as usize).max(1);
        let step = duration / n as f64;
        for s in 1..=n {
            let f = s as f64 / n as f64;
            *t += step;
            points.push(PathPoint {
                t: *t,
                x: from.x + (to[0] - from.x) * f,
                y: from.y + (to[1] - from.y) * f,
                z: from.z + (to[2] - from.z) * f,
                laser_on: false,
            });
        }
    };

    for layer in 0..g.n_layers {
        let z = z0 + layer as f64 * g.layer_thickness;
        for track in 0..g.n_tracks {
            let y = y0 + track as f64 * g.hatch;
            let forward = pattern == ScanPattern::Unidirectional || track % 2 == 0;
            let (xs, xe) = if forward { (x0, x0 + g.track_length) } else { (x0 + g.track_length, x0) };
            if !points.is_empty() {
                let last = *points.last().unwrap();
                let jump = ((xs - last.x).powi(2) + (y - last.y).powi(2)).sqrt();
                let duration = if track == 0 { g.dwell.max(dt) } else { (jump / speed).max(dt) };
                push_transit(&mut points, &mut t, [xs, y, z], duration);
                // Transit ends where the next track starts; that point is lit.
                points.last_mut().unwrap().laser_on = true;
            } else {
                points.push(PathPoint { t, x: xs, y, z, laser_on: true });
            }
            for s in 1..=steps_per_track {
                t += dt_track;
                let f = s as f64 / steps_per_track as f64;
                points.push(PathPoint { t, x: xs + (xe - xs) * f, y, z, laser_on: true });
            }
        }
    }
    let resolution_warning = beam_radius.map(|r| speed * dt > r).unwrap_or(false);
    Ok(ScanPath { points, dwell_between_layers: g.dwell, resolution_warning })
}

impl ScanPath {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.points.last().map(|p| p.t).unwrap_or(0.0)
    }

    /// Beam position and lit state at time `t`; a segment is lit when both
    /// of its end points are.
    pub fn pose_at(&self, t: f64) -> Option<([f64; 3], bool)> {
        let pts = &self.points;
        if pts.is_empty() || t < pts[0].t || t > pts[pts.len() - 1].t {
            return None;
        }
        let k = match pts.binary_search_by(|p| p.t.partial_cmp(&t).unwrap()) {
            Ok(k) => {
                if k + 1 < pts.len() {
                    k
                } else {
                    return Some(([pts[k].x, pts[k].y, pts[k].z], pts[k].laser_on));
                }
            }
            Err(k) => k - 1,
        };
        let (a, b) = (pts[k], pts[k + 1]);
        let f = (t - a.t) / (b.t - a.t);
        Some((
            [a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f, a.z + (b.z - a.z) * f],
            a.laser_on && b.laser_on,
        ))
    }

    /// Index of the point closest in time to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let pts = &self.points;
        match pts.binary_search_by(|p| p.t.partial_cmp(&t).unwrap()) {
            Ok(k) => k,
            Err(0) => 0,
            Err(k) if k >= pts.len() => pts.len() - 1,
            Err(k) => {
                if (t - pts[k - 1].t) <= (pts[k].t - t) {
                    k - 1
                } else {
                    k
                }
            }
        }
    }

    /// Maximal runs of lit points, as index ranges.
    pub fn tracks(&self) -> Vec<std::ops::Range<usize>> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, p) in self.points.iter().enumerate() {
            match (p.laser_on, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push(s..self.points.len());
        }
        runs
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,z,laser_on\n");
        for p in &self.points {
            let _ = writeln!(out, "{:e},{:e},{:e},{:e},{}", p.t, p.x, p.y, p.z, u8::from(p.laser_on));
        }
        out
    }

    pub fn from_csv(text: &str, dwell_between_layers: f64) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "t,x,y,z,laser_on" => {}
            other => {
                return Err(Error::InvalidInput(format!("unexpected scan path header {other:?}")));
            }
        }
        let mut points = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 5 {
                return Err(Error::InvalidInput(format!("scan path row {} has {} columns", n + 2, cols.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("scan path row {}: {e}", n + 2)))
            };
            let laser_on = matches!(cols[4], "1" | "true");
            points.push(PathPoint { t: num(cols[0])?, x: num(cols[1])?, y: num(cols[2])?, z: num(cols[3])?, laser_on });
        }
        if points.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidInput("scan path times must be strictly increasing".into()));
        }
        Ok(ScanPath { points, dwell_between_layers, resolution_warning: false })
    }
}

/// Residual heat factor settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct RhfConfig {
    /// Distance threshold R, m.
    pub radius: f64,
    /// Time threshold T, s.
    pub time_window: f64,
    /// Reference value RHF_c used for normalization.
    #[serde(default)]
    pub reference: Option<f64>,
}

impl Default for RhfConfig {
    fn default() -> Self {
        RhfConfig { radius: 2.0e-4, time_window: 2.0e-3, reference: None }
    }
}

impl RhfConfig {
    /// Set the reference to the raw factor at the temporal midpoint of the
    /// middle track (earlier point on ties).
    pub fn normalized_for(mut self, path: &ScanPath) -> Result<Self> {
        let tracks = path.tracks();
        if tracks.is_empty() {
            return Err(Error::InvalidInput("scan path has no lit track".into()));
        }
        let mid = &tracks[(tracks.len() - 1) / 2];
        let pts = &path.points[mid.clone()];
        let t_mid = 0.5 * (pts[0].t + pts[pts.len() - 1].t);
        let mut best = mid.start;
        for i in mid.clone() {
            if (path.points[i].t - t_mid).abs() < (path.points[best].t - t_mid).abs() {
                best = i;
            }
        }
        let reference = raw_rhf(path, best, &self);
        if !(reference > 0.0) {
            return Err(Error::InvalidInput(
                "reference residual heat factor is zero; path too coarse for the thresholds".into(),
            ));
        }
        self.reference = Some(reference);
        Ok(self)
    }
}

/// Unnormalized residual heat factor at point `i`.
///
/// Both factors of each summand are clamped at zero, so only predecessors
/// within the distance and time thresholds contribute.
pub fn raw_rhf(path: &ScanPath, i: usize, cfg: &RhfConfig) -> f64 {
    let pts = &path.points;
    let pi = pts[i];
    let mut sum = 0.0;
    for k in (0..i).rev() {
        let pk = pts[k];
        let elapsed = pi.t - pk.t;
        if elapsed >= cfg.time_window {
            break;
        }
        if !pk.laser_on {
            continue;
        }
        let dist = ((pi.x - pk.x).powi(2) + (pi.y - pk.y).powi(2) + (pi.z - pk.z).powi(2)).sqrt();
        let space = ((cfg.radius - dist) / cfg.radius).max(0.0);
        let time = ((cfg.time_window - elapsed) / cfg.time_window).max(0.0);
        sum += space * space * time;
    }
    sum
}

/// Normalized residual heat factor at point `i`.
pub fn rhf(path: &ScanPath, i: usize, cfg: &RhfConfig) -> Result<f64> {
    if i >= path.points.len() {
        return Err(Error::InvalidInput(format!("point index {i} outside path of {}", path.points.len())));
    }
    let reference = cfg.reference.ok_or(Error::Unnormalized)?;
    Ok(raw_rhf(path, i, cfg) / reference)
}

/// Normalized factor for every path point. Points with a zero raw value
/// (first points of the path) are reported as 1 so that the laws stay
/// defined there.
pub fn rhf_profile(path: &ScanPath, cfg: &RhfConfig) -> Result<Vec<f64>> {
    let reference = cfg.reference.ok_or(Error::Unnormalized)?;
    Ok((0..path.points.len())
        .map(|i| {
            let raw = raw_rhf(path, i, cfg);
            if raw > 0.0 {
                raw / reference
            } else {
                1.0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn a1_beam() -> BeamState {
        BeamState { power: 300.0, speed: 1.23, absorptivity: 0.28, radius: 50e-6, depth: 100e-6 }
    }

    #[test]
    fn flux_at_center_and_one_radius() {
        let beam = a1_beam();
        let center = volumetric_flux(&beam, 0.0, 0.0, 0.0);
        // 2·300·0.28 / (π·(5e-5)²·1e-4)
        assert_relative_eq!(center, 2.139e14, max_relative = 1e-3);
        let ring = volumetric_flux(&beam, beam.radius, 0.0, 50e-6);
        assert_relative_eq!(ring / center, (-2.0f64).exp(), max_relative = 1e-12);
        assert_eq!(volumetric_flux(&beam, 0.0, 0.0, 1.01 * beam.depth), 0.0);
    }

    #[test]
    fn flux_integrates_to_absorbed_power() {
        // Midpoint rule over ±5 r_b laterally and the full depth.
        let beam = a1_beam();
        let n = 400;
        let half = 5.0 * beam.radius;
        let h = 2.0 * half / n as f64;
        let mut lateral = 0.0;
        for i in 0..n {
            let x = -half + (i as f64 + 0.5) * h;
            for j in 0..n {
                let y = -half + (j as f64 + 0.5) * h;
                lateral += volumetric_flux(&beam, x, y, 0.5 * beam.depth) * h * h;
            }
        }
        let total = lateral * beam.depth;
        assert_relative_eq!(total, beam.absorbed_power(), max_relative = 1e-3);
    }

    #[test]
    fn law_floor_and_exact_reduction() {
        let tiny = StochasticBeamLaw::new(4.1e-7, 1e-9, 2e-7).unwrap();
        let b = beam_from_law(&tiny, 300.0, 1.23, 1.0).unwrap();
        assert_eq!(b.absorptivity, 0.28);

        let law = StochasticBeamLaw::new(4.1e-7, 2e-3, 2e-7).unwrap();
        let b = beam_from_law(&law, 300.0, 1.23, 1.0).unwrap();
        let e = 300.0 / 1.23;
        assert_eq!(b.depth, law.p1 * e);
        assert_eq!(b.radius, law.p3 * e);
        assert_eq!(b.absorptivity, law.p2 * e);

        // P1 = 4.1e-7, P/V = 243.9 → d = 1.0e-4
        let b = beam_from_law(&law, 243.9, 1.0, 1.0).unwrap();
        assert_relative_eq!(b.depth, 1.0e-4, max_relative = 1e-3);
    }

    #[test]
    fn law_rejects_non_positive_coefficients() {
        assert!(matches!(StochasticBeamLaw::new(0.0, 1e-3, 1e-7), Err(Error::InvalidLaw(_))));
        let bad = StochasticBeamLaw { p1: 1e-7, p2: -1.0, p3: 1e-7 };
        assert!(beam_from_law(&bad, 300.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn multi_layer_path() {
        let geom = PathGeometry {
            track_length: 5e-3,
            n_tracks: 1,
            hatch: 1e-4,
            n_layers: 10,
            layer_thickness: 40e-6,
            start: [0.0, 0.0, 0.0],
            dwell: 5e-4,
            pattern: None,
        };
        let path = generate_path(&geom, 1.23, 1e-5, Some(50e-6)).unwrap();
        assert_eq!(path.tracks().len(), 10);
        let mut zs: Vec<f64> = path.tracks().iter().map(|r| path.points[r.start].z).collect();
        zs.dedup();
        assert_eq!(zs.len(), 10);
        for w in zs.windows(2) {
            assert_relative_eq!(w[1] - w[0], 40e-6, max_relative = 1e-9);
        }
        assert!(path.points.windows(2).all(|w| w[1].t > w[0].t));
        assert!(!path.resolution_warning);
        // Every track is unidirectional.
        for r in path.tracks() {
            assert!(path.points[r.end - 1].x > path.points[r.start].x);
        }
    }

    #[test]
    fn single_track_has_no_dwell() {
        let path = generate_path(&PathGeometry::single_track(1e-3, [0.0; 3]), 1.0, 1e-5, None).unwrap();
        assert!(path.points.iter().all(|p| p.laser_on));
        assert_eq!(path.points.len(), 101);
        for w in path.points.windows(2) {
            assert_relative_eq!(w[1].x - w[0].x, 1e-5, max_relative = 1e-9);
        }
    }

    #[test]
    fn plane_track_count() {
        let n = tracks_for_width(3e-3, 0.1e-3);
        assert_eq!(n, 30);
        let geom = PathGeometry {
            track_length: 3e-3,
            n_tracks: n,
            hatch: 0.1e-3,
            n_layers: 1,
            layer_thickness: 40e-6,
            start: [0.0; 3],
            dwell: 5e-4,
            pattern: None,
        };
        let path = generate_path(&geom, 1.23, 2e-5, None).unwrap();
        assert_eq!(path.tracks().len(), 30);
    }

    #[test]
    fn coarse_step_sets_warning() {
        let path = generate_path(&PathGeometry::single_track(1e-3, [0.0; 3]), 1.0, 1e-4, Some(50e-6)).unwrap();
        assert!(path.resolution_warning);
    }

    #[test]
    fn rhf_limits() {
        let cfg = RhfConfig::default();
        let path = generate_path(&PathGeometry::single_track(1e-3, [0.0; 3]), 1.0, 1e-5, None).unwrap();
        assert_eq!(raw_rhf(&path, 0, &cfg), 0.0);
        assert!(matches!(rhf(&path, 3, &cfg), Err(Error::Unnormalized)));

        // A coincident predecessor scanned an instant ago contributes ~1.
        let p = ScanPath {
            points: vec![
                PathPoint { t: 0.0, x: 0.0, y: 0.0, z: 0.0, laser_on: true },
                PathPoint { t: 1e-12, x: 0.0, y: 0.0, z: 0.0, laser_on: true },
            ],
            dwell_between_layers: 5e-4,
            resolution_warning: false,
        };
        assert_relative_eq!(raw_rhf(&p, 1, &cfg), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn rhf_exceeds_one_near_serpentine_corner() {
        let geom = PathGeometry {
            track_length: 3e-3,
            n_tracks: 2,
            hatch: 0.1e-3,
            n_layers: 1,
            layer_thickness: 40e-6,
            start: [0.0; 3],
            dwell: 5e-4,
            pattern: Some(ScanPattern::Serpentine),
        };
        let path = generate_path(&geom, 1.23, 5e-6, None).unwrap();
        let cfg = RhfConfig::default().normalized_for(&path).unwrap();
        let tracks = path.tracks();
        let second = &tracks[1];
        // ~100 µm into the return track, next to the end of the first one.
        let corner = second.start + (100e-6 / (1.23 * 5e-6)) as usize;
        let middle = second.start + second.len() / 2;
        let at_corner = rhf(&path, corner, &cfg).unwrap();
        let at_middle = rhf(&path, middle, &cfg).unwrap();
        assert!(at_corner > 1.0, "corner RHF {at_corner}");
        assert_relative_eq!(at_middle, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn path_csv_round_trip() {
        let path = generate_path(&PathGeometry::single_track(2e-4, [1e-4, 0.0, 4e-4]), 1.23, 1e-5, None).unwrap();
        let back = ScanPath::from_csv(&path.to_csv(), path.dwell_between_layers).unwrap();
        assert_eq!(back.points, path.points);
    }

    proptest! {
        #[test]
        fn law_is_monotone_in_energy(e1 in 50.0f64..400.0, e2 in 50.0f64..400.0, rhf in 0.5f64..1.5) {
            let law = StochasticBeamLaw::new(4e-7, 1.5e-3, 2e-7).unwrap();
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let a = beam_from_law(&law, lo, 1.0, rhf).unwrap();
            let b = beam_from_law(&law, hi, 1.0, rhf).unwrap();
            prop_assert!(a.depth <= b.depth && a.radius <= b.radius && a.absorptivity <= b.absorptivity);
        }

        #[test]
        fn raw_rhf_non_negative(i in 0usize..300) {
            let geom = PathGeometry { track_length: 1e-3, n_tracks: 3, hatch: 1e-4, n_layers: 1,
                layer_thickness: 4e-5, start: [0.0; 3], dwell: 5e-4, pattern: None };
            let path = generate_path(&geom, 1.0, 1e-5, None).unwrap();
            let i = i % path.points.len();
            prop_assert!(raw_rhf(&path, i, &RhfConfig::default()) >= 0.0);
        }
    }
}
