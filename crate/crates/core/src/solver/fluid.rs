//! Reduced melt-pool flow: explicit momentum update on liquid cells
//! followed by one pressure projection.

use crate::error::{Error, Result};
use crate::material::MaterialModel;
use crate::solver::{Domain, SolverConfig, ThermalState};

const NONE: usize = usize::MAX;

/// Advance cell velocities by `dt`. Cells with no liquid have zero
/// velocity.
pub fn step_fluid(
    state: &mut ThermalState,
    domain: &Domain,
    material: &MaterialModel,
    dt: f64,
    config: &SolverConfig,
) -> Result<()> {
    let Some(vel) = state.velocity.as_mut() else {
        return Err(Error::InvalidInput("fluid step needs a velocity field".into()));
    };
    let (nx, ny, nza) = (domain.nx, domain.ny, state.active_nz);
    let plane = nx * ny;
    let n = nza * plane;
    let dx = domain.dx;
    let fl = &state.liquid_fraction;
    let temp = &state.temperature;

    // Index liquid cells.
    let mut lid = vec![NONE; n];
    let mut cells = Vec::new();
    for id in 0..n {
        if fl[id] > 0.0 {
            lid[id] = cells.len();
            cells.push(id);
        }
    }
    for c in vel.iter_mut() {
        for id in 0..c.len() {
            if id >= n || lid[id] == NONE {
                c[id] = 0.0;
            }
        }
    }
    if cells.is_empty() {
        return Ok(());
    }

    let coords = |id: usize| (id % nx, (id / nx) % ny, id / plane);
    let counts = [nx, ny, nza];
    let strides = [1, nx, plane];
    let neighbor = |id: usize, axis: usize, up: bool| -> Option<usize> {
        let (i, j, k) = coords(id);
        let p = [i, j, k][axis];
        if up {
            (p + 1 < counts[axis]).then(|| id + strides[axis])
        } else {
            (p > 0).then(|| id - strides[axis])
        }
    };

    let rho = material.liquid_density;
    let nu = material.viscosity / rho;
    let t_mean = cells.iter().map(|&id| temp[id]).sum::<f64>() / cells.len() as f64;
    let darcy_c = 180.0 * material.viscosity / (material.dendrite_spacing_c.powi(2));

    // Momentum predictor.
    let mut star = vec![[0.0; 3]; cells.len()];
    for (l, &id) in cells.iter().enumerate() {
        let (_, _, k) = coords(id);
        let mut acc = [0.0; 3];
        for (comp, a) in acc.iter_mut().enumerate() {
            let uc = vel[comp][id];
            let mut lap = 0.0;
            let mut adv = 0.0;
            for axis in 0..3 {
                let lo = neighbor(id, axis, false);
                let hi = neighbor(id, axis, true);
                // Liquid neighbors carry their velocity, walls are no-slip,
                // the open top is zero-gradient.
                let val = |nb: Option<usize>| match nb {
                    Some(b) if lid[b] != NONE => vel[comp][b],
                    Some(_) => 0.0,
                    None => uc,
                };
                let (vl, vh) = (val(lo), val(hi));
                lap += vl - 2.0 * uc + vh;
                let ua = vel[axis][id];
                adv += if ua > 0.0 { ua * (uc - vl) } else { ua * (vh - uc) };
            }
            *a = nu * lap / (dx * dx) - adv / dx;
        }
        acc[2] += material.gravity * material.thermal_expansion * (temp[id] - t_mean);
        if k + 1 == nza {
            // Thermocapillary shear on the free surface.
            for axis in 0..2 {
                let t_lo = neighbor(id, axis, false).map_or(temp[id], |b| temp[b]);
                let t_hi = neighbor(id, axis, true).map_or(temp[id], |b| temp[b]);
                let span = (neighbor(id, axis, false).is_some() as u8 + neighbor(id, axis, true).is_some() as u8).max(1);
                let grad = (t_hi - t_lo) / (span as f64 * dx);
                acc[axis] += material.marangoni_coeff * grad / (rho * dx);
            }
        }
        let f = fl[id];
        let sink = darcy_c * (1.0 - f).powi(2) / (f.powi(3) + material.darcy_epsilon_b);
        let damp = 1.0 / (1.0 + dt * sink / rho);
        for comp in 0..3 {
            star[l][comp] = (vel[comp][id] + dt * acc[comp]) * damp;
        }
    }

    // Face-based projection: faces between two liquid cells carry the mean
    // velocity, all others are closed.
    let mut div = vec![0.0; cells.len()];
    for (l, &id) in cells.iter().enumerate() {
        for axis in 0..3 {
            if let Some(b) = neighbor(id, axis, true) {
                let lb = lid[b];
                if lb != NONE {
                    let uf = 0.5 * (star[l][axis] + star[lb][axis]);
                    div[l] += uf / dx;
                    div[lb] -= uf / dx;
                }
            }
        }
    }
    let norm: f64 = div.iter().map(|d| d * d).sum::<f64>().sqrt();
    let mut phi = vec![0.0; cells.len()];
    if norm > 0.0 {
        let nbrs: Vec<Vec<usize>> = cells
            .iter()
            .map(|&id| {
                (0..3)
                    .flat_map(|axis| [neighbor(id, axis, false), neighbor(id, axis, true)])
                    .flatten()
                    .filter_map(|b| (lid[b] != NONE).then_some(lid[b]))
                    .collect()
            })
            .collect();
        let h2 = dx * dx;
        let omega = 1.6;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..config.projection_max_iter {
            for l in 0..cells.len() {
                let m = nbrs[l].len();
                if m == 0 {
                    continue;
                }
                let s: f64 = nbrs[l].iter().map(|&b| phi[b]).sum();
                let target = (s - h2 * div[l]) / m as f64;
                phi[l] += omega * (target - phi[l]);
            }
            residual = (0..cells.len())
                .map(|l| {
                    let m = nbrs[l].len() as f64;
                    let s: f64 = nbrs[l].iter().map(|&b| phi[b]).sum();
                    let r = (s - m * phi[l]) / h2 - div[l];
                    if nbrs[l].is_empty() {
                        0.0
                    } else {
                        r * r
                    }
                })
                .sum::<f64>()
                .sqrt()
                / norm;
            if residual < config.projection_tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::FluidDivergence { step: state.step + 1, residual });
        }
    }

    for (l, &id) in cells.iter().enumerate() {
        for axis in 0..3 {
            let mut g = 0.0;
            let mut faces = 0;
            for (nb, sign) in [(neighbor(id, axis, false), -1.0), (neighbor(id, axis, true), 1.0)] {
                if let Some(b) = nb {
                    if lid[b] != NONE {
                        g += sign * (phi[lid[b]] - phi[l]) / dx;
                        faces += 1;
                    }
                }
            }
            let corr = if faces > 0 { g / faces as f64 } else { 0.0 };
            let v = star[l][axis] - corr;
            if !(v.abs() <= config.max_velocity) {
                return Err(Error::FluidDivergence { step: state.step + 1, residual: v.abs() });
            }
            vel[axis][id] = v;
        }
    }
    Ok(())
}
