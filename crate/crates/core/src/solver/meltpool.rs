use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::MaterialModel;
use crate::solver::{Domain, ThermalState};

/// Melt-pool width and depth in one cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeltPoolDims {
    pub width: f64,
    pub depth: f64,
    pub cross_section_x: f64,
    /// Sampling time, or `None` for an average over a steady stretch.
    pub time: Option<f64>,
    pub melted: bool,
}

impl MeltPoolDims {
    fn not_melted(x: f64, time: Option<f64>) -> Self {
        MeltPoolDims { width: 0.0, depth: 0.0, cross_section_x: x, time, melted: false }
    }
}

/// Width and depth of the `T_peak ≥ T_liquidus` envelope in the y–z plane
/// through `cross_section_x`, with sub-cell interpolation of the crossing.
pub fn extract_meltpool_dims(
    state: &ThermalState,
    domain: &Domain,
    material: &MaterialModel,
    cross_section_x: f64,
) -> MeltPoolDims {
    extract_meltpool_dims_with(state, domain, material, cross_section_x, true)
}

/// As [`extract_meltpool_dims`]; without interpolation extents snap to cell
/// faces.
pub fn extract_meltpool_dims_with(
    state: &ThermalState,
    domain: &Domain,
    material: &MaterialModel,
    cross_section_x: f64,
    interpolate: bool,
) -> MeltPoolDims {
    let tl = material.t_liquidus;
    let tp = &state.peak_temperature;
    let i = domain.column_of(cross_section_x);
    let top = state.active_nz - 1;
    let dx = domain.dx;
    let at = |j: usize, k: usize| tp[domain.idx(i, j, k)];
    let time = Some(state.time);

    let melted: Vec<usize> = (0..domain.ny).filter(|&j| at(j, top) >= tl).collect();
    let (Some(&j_lo), Some(&j_hi)) = (melted.first(), melted.last()) else {
        return MeltPoolDims::not_melted(cross_section_x, time);
    };
    // Fraction of a cell spacing past the center of the last melted cell.
    let crossing = |inside: f64, outside: Option<f64>| -> f64 {
        match (interpolate, outside) {
            (true, Some(o)) if inside > o => ((inside - tl) / (inside - o)).clamp(0.0, 1.0),
            (true, Some(_)) => 0.0,
            _ => 0.5,
        }
    };
    let upper = domain.center(1, j_hi) + dx * crossing(at(j_hi, top), (j_hi + 1 < domain.ny).then(|| at(j_hi + 1, top)));
    let width = if domain.symmetric_y {
        2.0 * (upper - domain.origin[1])
    } else {
        let lower = domain.center(1, j_lo) - dx * crossing(at(j_lo, top), (j_lo > 0).then(|| at(j_lo - 1, top)));
        upper - lower
    };

    let z_top = domain.origin[2] + state.active_nz as f64 * dx;
    let mut depth: f64 = 0.0;
    for j in j_lo..=j_hi {
        if at(j, top) < tl {
            continue;
        }
        let mut k = top;
        while k > 0 && at(j, k - 1) >= tl {
            k -= 1;
        }
        let bottom = domain.center(2, k) - dx * crossing(at(j, k), (k > 0).then(|| at(j, k - 1)));
        depth = depth.max(z_top - bottom);
    }
    MeltPoolDims { width, depth, cross_section_x, time, melted: true }
}

/// Mean dimensions over the cross-sections with centers in `[x_from, x_to]`.
pub fn steady_dims(
    state: &ThermalState,
    domain: &Domain,
    material: &MaterialModel,
    x_from: f64,
    x_to: f64,
) -> Result<MeltPoolDims> {
    let (a, b) = (domain.column_of(x_from), domain.column_of(x_to));
    if b < a {
        return Err(Error::InvalidInput(format!("empty averaging window [{x_from}, {x_to}]")));
    }
    let (mut w, mut d, mut any) = (0.0, 0.0, false);
    for i in a..=b {
        let dims = extract_meltpool_dims(state, domain, material, domain.center(0, i));
        w += dims.width;
        d += dims.depth;
        any |= dims.melted;
    }
    let count = (b - a + 1) as f64;
    Ok(MeltPoolDims {
        width: w / count,
        depth: d / count,
        cross_section_x: 0.5 * (x_from + x_to),
        time: None,
        melted: any,
    })
}
