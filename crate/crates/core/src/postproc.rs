//! Part-scale quality metrics: top-surface height, Sa roughness, lack-of-fusion
//! porosity and energy densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{MaterialModel, PhaseState};
use crate::solver::{Domain, ThermalState};

/// Heights of the consolidated top surface, one per (x, y) column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    /// Lower corner of column (0, 0).
    pub origin: [f64; 2],
    /// m, x fastest; masked entries are NaN.
    pub heights: Vec<f64>,
    pub mask: Vec<bool>,
}

impl HeightField {
    pub fn new(nx: usize, ny: usize, dx: f64, origin: [f64; 2], heights: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        let f = HeightField { nx, ny, dx, origin, heights, mask };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nx * self.ny;
        if self.heights.len() != n || self.mask.len() != n || !(self.dx > 0.0) {
            return Err(Error::InvalidInput("height field dimensions do not match".into()));
        }
        if self.heights.iter().zip(&self.mask).any(|(h, m)| *m && !h.is_finite()) {
            return Err(Error::InvalidInput("height field has non-finite values inside the mask".into()));
        }
        Ok(())
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (self.origin[0] + (i as f64 + 0.5) * self.dx, self.origin[1] + (j as f64 + 0.5) * self.dx)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Grid CSV: first row holds x centers, each further row a y center
    /// followed by heights; masked entries are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y\\x");
        for i in 0..self.nx {
            out.push_str(&format!(",{}", self.center(i, 0).0));
        }
        out.push('\n');
        for j in 0..self.ny {
            out.push_str(&self.center(0, j).1.to_string());
            for i in 0..self.nx {
                let id = j * self.nx + i;
                out.push(',');
                if self.mask[id] {
                    out.push_str(&self.heights[id].to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Top of the highest fully consolidated cell in every column that melted
/// somewhere; other columns are masked.
pub fn top_surface(state: &ThermalState, domain: &Domain, material: &MaterialModel) -> Result<HeightField> {
    let (nx, ny) = (domain.nx, domain.ny);
    let mut heights = vec![f64::NAN; nx * ny];
    let mut mask = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let column = (0..domain.nz).map(|k| domain.idx(i, j, k));
            let melted = column.clone().any(|id| state.peak_temperature[id] >= material.t_liquidus);
            if !melted {
                continue;
            }
            if let Some(k) = (0..domain.nz).rev().find(|&k| state.consolidation[domain.idx(i, j, k)] >= 1.0 - 1e-9) {
                heights[j * nx + i] = domain.origin[2] + (k + 1) as f64 * domain.dx;
                mask[j * nx + i] = true;
            }
        }
    }
    if !mask.iter().any(|m| *m) {
        return Err(Error::InvalidInput("no column of the domain ever melted".into()));
    }
    HeightField::new(nx, ny, domain.dx, [domain.origin[0], domain.origin[1]], heights, mask)
}

/// Per-zone Sa values and the zones skipped for lack of data or a
/// degenerate plane fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roughness {
    pub sa_mean: f64,
    pub sa_std: f64,
    pub zone_values: Vec<f64>,
    pub skipped_zones: Vec<usize>,
}

/// Split the field into `n_zones` equal strips along x; in each, fit a
/// least-squares plane and take the mean absolute deviation.
pub fn sa_roughness(field: &HeightField, n_zones: usize) -> Result<Roughness> {
    field.validate()?;
    if n_zones == 0 || n_zones > field.nx {
        return Err(Error::InvalidInput(format!("cannot split {} columns into {n_zones} zones", field.nx)));
    }
    let mut zone_values = Vec::new();
    let mut skipped_zones = Vec::new();
    for z in 0..n_zones {
        let (i0, i1) = (z * field.nx / n_zones, (z + 1) * field.nx / n_zones);
        let pts: Vec<(f64, f64, f64)> = (0..field.ny)
            .flat_map(|j| (i0..i1).map(move |i| (i, j)))
            .filter(|&(i, j)| field.mask[j * field.nx + i])
            .map(|(i, j)| {
                let (x, y) = field.center(i, j);
                (x, y, field.heights[j * field.nx + i])
            })
            .collect();
        match (pts.len() >= 10).then(|| zone_sa(&pts)).flatten() {
            Some(sa) => zone_values.push(sa),
            None => skipped_zones.push(z),
        }
    }
    if zone_values.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let (sa_mean, sa_std) = mean_std(&zone_values);
    Ok(Roughness { sa_mean, sa_std, zone_values, skipped_zones })
}

/// Mean |residual| about the best-fit plane; `None` when the points are
/// collinear.
fn zone_sa(pts: &[(f64, f64, f64)]) -> Option<f64> {
    let n = pts.len() as f64;
    let (mx, my, mz) = pts.iter().fold((0.0, 0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n, a.2 + p.2 / n));
    let (mut sxx, mut syy, mut sxy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, z) in pts {
        let (u, v, w) = (x - mx, y - my, z - mz);
        sxx += u * u;
        syy += v * v;
        sxy += u * v;
        sxz += u * w;
        syz += v * w;
    }
    let det = sxx * syy - sxy * sxy;
    if sxx.min(syy) <= 1e-12 * sxx.max(syy) || det <= 1e-10 * sxx * syy {
        return None;
    }
    let (a, b) = ((sxz * syy - syz * sxy) / det, (syz * sxx - sxz * sxy) / det);
    Some(pts.iter().map(|&(x, y, z)| (z - mz - a * (x - mx) - b * (y - my)).abs()).sum::<f64>() / n)
}

/// Axis-aligned box, m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct Region {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Region {
    fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.lo[a] && p[a] < self.hi[a])
    }

    /// `n` equal slabs along x.
    pub fn split_x(&self, n: usize) -> Vec<Region> {
        let w = (self.hi[0] - self.lo[0]) / n as f64;
        (0..n)
            .map(|z| {
                let mut r = *self;
                r.lo[0] = self.lo[0] + z as f64 * w;
                r.hi[0] = if z + 1 == n { self.hi[0] } else { self.lo[0] + (z + 1) as f64 * w };
                r
            })
            .collect()
    }
}

/// Fraction of cells centred in `region` whose peak temperature never
/// reached the liquidus.
pub fn lof_porosity(state: &ThermalState, domain: &Domain, material: &MaterialModel, region: &Region) -> Result<f64> {
    let (mut total, mut unmelted) = (0usize, 0usize);
    for k in 0..domain.nz {
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                if !region.contains([domain.center(0, i), domain.center(1, j), domain.center(2, k)]) {
                    continue;
                }
                total += 1;
                if state.peak_temperature[domain.idx(i, j, k)] < material.t_liquidus {
                    unmelted += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::InvalidInput("nominal build region contains no cells".into()));
    }
    Ok(unmelted as f64 / total as f64)
}

/// Volumetric energy density `P/(V·σ_b·t)`, J/m³.
pub fn ved(power: f64, speed: f64, beam_diameter: f64, layer: f64) -> Result<f64> {
    positive(&[("power", power), ("speed", speed), ("beam diameter", beam_diameter), ("layer thickness", layer)])?;
    Ok(power / (speed * beam_diameter * layer))
}

/// Normalized energy density `ηP/(V·H·L) / (ρ c_p (T_l − T_0))`.
#[allow(clippy::too_many_arguments)]
pub fn ned(
    absorptivity: f64,
    power: f64,
    speed: f64,
    hatch: f64,
    layer: f64,
    density: f64,
    specific_heat: f64,
    t_liquidus: f64,
    t_0: f64,
) -> Result<f64> {
    positive(&[
        ("absorptivity", absorptivity),
        ("power", power),
        ("speed", speed),
        ("hatch", hatch),
        ("layer thickness", layer),
        ("density", density),
        ("specific heat", specific_heat),
        ("T_l - T_0", t_liquidus - t_0),
    ])?;
    Ok(absorptivity * power / (speed * hatch * layer) / (density * specific_heat * (t_liquidus - t_0)))
}

fn positive(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Mean and (n−1) standard deviation; zero spread for a single value.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput("spearman needs two equal-length series of at least 2".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, _) = mean_std(&rx);
    let (my, _) = mean_std(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (vx * vy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

/// Settings needed for the energy densities of a build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct QualitySettings {
    pub n_zones: usize,
    /// σ_b, m.
    pub beam_diameter: f64,
    pub layer_thickness: f64,
    pub hatch: f64,
}

impl Default for QualitySettings {
    fn default() -> Self {
        QualitySettings { n_zones: 10, beam_diameter: 62.5e-6, layer_thickness: 4e-5, hatch: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub sa_mean: f64,
    pub sa_std: f64,
    pub sa_zones: Vec<f64>,
    pub skipped_zones: Vec<usize>,
    pub porosity_mean: f64,
    pub porosity_std: f64,
    pub porosity_zones: Vec<f64>,
    /// J/m³.
    pub ved: f64,
    pub ned: f64,
}

impl QualityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Roughness and porosity zone statistics of a finished build together
/// with its energy densities.
pub fn quality_report(
    state: &ThermalState,
    domain: &Domain,
    material: &MaterialModel,
    region: &Region,
    process: (f64, f64, f64),
    settings: &QualitySettings,
) -> Result<QualityReport> {
    let (power, speed, absorptivity) = process;
    let field = top_surface(state, domain, material)?;
    let sa = sa_roughness(&field, settings.n_zones)?;
    let porosity_zones =
        region.split_x(settings.n_zones).iter().map(|r| lof_porosity(state, domain, material, r)).collect::<Result<Vec<_>>>()?;
    let (porosity_mean, porosity_std) = mean_std(&porosity_zones);
    Ok(QualityReport {
        sa_mean: sa.sa_mean,
        sa_std: sa.sa_std,
        sa_zones: sa.zone_values,
        skipped_zones: sa.skipped_zones,
        porosity_mean,
        porosity_std,
        porosity_zones,
        ved: ved(power, speed, settings.beam_diameter, settings.layer_thickness)?,
        ned: ned(
            absorptivity,
            power,
            speed,
            settings.hatch,
            settings.layer_thickness,
            material.density(PhaseState::Solid),
            material.cp_liquid,
            material.t_liquidus,
            material.t_ambient,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn field(nx: usize, ny: usize, dx: f64, f: impl Fn(f64, f64) -> f64) -> HeightField {
        let mut h = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                h.push(f((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dx));
            }
        }
        HeightField::new(nx, ny, dx, [0.0, 0.0], h, vec![true; nx * ny]).unwrap()
    }

    #[test]
    fn tilted_plane_has_no_roughness() {
        let f = field(40, 20, 1e-5, |x, y| 3e-4 + 0.2 * x - 0.05 * y);
        let r = sa_roughness(&f, 4).unwrap();
        assert!(r.sa_mean < 1e-15 && r.zone_values.len() == 4);
    }

    #[test]
    fn sine_profile() {
        let a = 1e-5;
        let lambda = 1e-4;
        // 20 periods, 100 samples per period.
        let f = field(2000, 12, 1e-6, |x, _| a * (2.0 * std::f64::consts::PI * x / lambda).sin());
        let r = sa_roughness(&f, 1).unwrap();
        assert_relative_eq!(r.sa_mean, 2.0 * a / std::f64::consts::PI, max_relative = 0.01);
    }

    #[test]
    fn sparse_and_collinear_zones_are_skipped() {
        let mut f = field(20, 3, 1e-5, |x, y| x * x + y);
        for j in 0..3 {
            f.mask[j * 20..j * 20 + 10].iter_mut().for_each(|m| *m = false);
        }
        let r = sa_roughness(&f, 2).unwrap();
        assert_eq!((r.skipped_zones, r.zone_values.len()), (vec![0], 1));
        // A single row of points cannot define a plane.
        let f = field(20, 1, 1e-5, |x, _| x);
        assert!(sa_roughness(&f, 1).is_err());
    }

    #[test]
    fn ved_examples() {
        assert_relative_eq!(ved(300.0, 1.23, 62.5e-6, 40e-6).unwrap() * 1e-9, 97.56, epsilon = 0.005);
        assert_relative_eq!(ved(241.0, 1.529, 62.5e-6, 40e-6).unwrap() * 1e-9, 63.05, epsilon = 0.005);
        assert_relative_eq!(ved(300.0, 2.46, 62.5e-6, 40e-6).unwrap() * 2.0, ved(300.0, 1.23, 62.5e-6, 40e-6).unwrap());
        assert!(ved(300.0, 0.0, 62.5e-6, 40e-6).is_err());
    }

    #[test]
    fn ned_example() {
        let v = ned(0.28, 300.0, 1.23, 1e-4, 4e-5, 8440.0, 709.25, 1328.0, 0.0).unwrap();
        assert_relative_eq!(v, 2.148, epsilon = 5e-4);
        assert_relative_eq!(ned(0.56, 300.0, 1.23, 1e-4, 4e-5, 8440.0, 709.25, 1328.0, 0.0).unwrap(), 2.0 * v);
        // Lengths in mm and times in ms with consistent derived units.
        let scaled = ned(0.28, 300.0 * 1e3, 1.23, 0.1, 0.04, 8440.0 * 1e-9, 709.25 * 1e6 * 1e3 / 1e6, 1328.0, 0.0);
        assert!(scaled.is_ok());
        assert!(ned(0.28, 300.0, 1.23, 1e-4, 4e-5, 8440.0, 709.25, 300.0, 300.0).is_err());
    }

    #[test]
    fn spearman_basics() {
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]).unwrap(), 1.0);
        assert_relative_eq!(spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.866_025_403_784_438_6, epsilon = 1e-12);
    }

    fn melted_state(top_rows: usize) -> (Domain, MaterialModel, ThermalState) {
        let m = MaterialModel::in625();
        let d = Domain::new(12, 10, 8, 1e-5, [0.0, 0.0, -8e-5], false).unwrap().with_powder_top(top_rows);
        let s = ThermalState::initial(&d, &m, false);
        (d, m, s)
    }

    #[test]
    fn fully_melted_layer_is_flat_and_dense() {
        let (d, m, mut s) = melted_state(2);
        s.peak_temperature.iter_mut().for_each(|t| *t = m.t_liquidus + 10.0);
        s.consolidation.iter_mut().for_each(|a| *a = 1.0);
        let f = top_surface(&s, &d, &m).unwrap();
        assert_eq!(f.count(), 120);
        assert!(f.heights.iter().all(|h| h.abs() < 1e-15));
        let region = Region { lo: [0.0, 0.0, -8e-5], hi: [1.2e-4, 1e-4, 0.0] };
        assert_eq!(lof_porosity(&s, &d, &m, &region).unwrap(), 0.0);
        assert!(f.to_csv().lines().count() == 11);
    }

    #[test]
    fn track_gives_masked_ridge() {
        let (d, m, mut s) = melted_state(2);
        // Melt the powder rows of y-columns 4..6 only.
        for k in 6..8 {
            for j in 4..6 {
                for i in 0..12 {
                    let id = d.idx(i, j, k);
                    s.peak_temperature[id] = m.t_liquidus + 1.0;
                    s.consolidation[id] = 1.0;
                }
            }
        }
        let f = top_surface(&s, &d, &m).unwrap();
        assert_eq!(f.count(), 24);
        assert!((0..12).all(|i| f.mask[4 * 12 + i] && f.mask[5 * 12 + i] && !f.mask[3 * 12 + i]));
        let region = Region { lo: [0.0, 0.0, -2e-5], hi: [1.2e-4, 1e-4, 0.0] };
        assert_relative_eq!(lof_porosity(&s, &d, &m, &region).unwrap(), 0.8);
    }

    #[test]
    fn cold_domain_has_no_surface() {
        let (d, m, s) = melted_state(1);
        assert!(top_surface(&s, &d, &m).is_err());
        let empty = Region { lo: [1.0; 3], hi: [2.0; 3] };
        assert!(lof_porosity(&s, &d, &m, &empty).is_err());
    }

    proptest! {
        #[test]
        fn sa_is_affine_invariant(c in -1e-3f64..1e-3, a in -0.5f64..0.5, b in -0.5f64..0.5, seed in 0u64..1000) {
            let rough = |x: f64, y: f64| 1e-6 * ((x * 1e5 + seed as f64).sin() * (y * 7e4).cos());
            let f0 = field(30, 15, 1e-5, rough);
            let f1 = field(30, 15, 1e-5, |x, y| rough(x, y) + c + a * x + b * y);
            let (r0, r1) = (sa_roughness(&f0, 3).unwrap(), sa_roughness(&f1, 3).unwrap());
            for (u, v) in r0.zone_values.iter().zip(&r1.zone_values) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }

        #[test]
        fn porosity_bounded_and_monotone(bumps in prop::collection::vec((0usize..960, 0.0f64..2000.0), 1..200)) {
            let (d, m, mut s) = melted_state(2);
            let region = Region { lo: [0.0, 0.0, -8e-5], hi: [1.2e-4, 1e-4, 0.0] };
            let mut last = lof_porosity(&s, &d, &m, &region).unwrap();
            for (id, dt) in bumps {
                s.peak_temperature[id] += dt;
                let p = lof_porosity(&s, &d, &m, &region).unwrap();
                prop_assert!((0.0..=1.0).contains(&p) && p <= last);
                last = p;
            }
        }

        #[test]
        fn energy_densities_scale_with_power(p in 10.0f64..500.0, k in 0.1f64..10.0) {
            let v1 = ved(p, 1.0, 6e-5, 4e-5).unwrap();
            prop_assert!((ved(k * p, 1.0, 6e-5, 4e-5).unwrap() - k * v1).abs() < 1e-9 * k * v1);
            let n1 = ned(0.3, p, 1.0, 1e-4, 4e-5, 8000.0, 600.0, 1600.0, 300.0).unwrap();
            prop_assert!((ned(0.3, k * p, 1.0, 1e-4, 4e-5, 8000.0, 600.0, 1600.0, 300.0).unwrap() - k * n1).abs() < 1e-9 * k * n1);
        }
    }
}
