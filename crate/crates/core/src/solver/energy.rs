use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::heat_source::BeamState;
use crate::material::MaterialModel;
use crate::solver::state::EnthalpyLaw;
use crate::solver::{Domain, SolverConfig, ThermalState};

/// Beam parameters and the position of its axis on the top surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamPose {
    pub beam: BeamState,
    pub x: f64,
    pub y: f64,
}

/// Reusable scratch buffers for the energy update.
///
/// Also remembers which x-rows changed in the previous step: a row whose
/// own and neighboring rows were unchanged, and which the beam does not
/// touch, would receive the same increment as before, which already left it
/// unchanged. Skipping such rows is therefore exact.
#[derive(Debug, Default, Clone)]
pub struct EnergyWorkspace {
    conductivity: Vec<f64>,
    dh: Vec<f64>,
    changed: Vec<bool>,
    todo: Vec<bool>,
    last: Option<(u64, usize)>,
}

/// Largest stable explicit step, `dt_safety·Δx²·min(C/k)/3`, with the
/// ratio sampled over temperature and consolidation.
///
/// A safety of 0.5 sits at the stability limit of the uniform 3D stencil.
pub fn stable_dt(material: &MaterialModel, dx: f64, dt_safety: f64) -> f64 {
    let t_lo = material.t_ambient.min(material.t_preheat).min(material.t_reference);
    let t_hi = 2.0 * material.t_liquidus;
    let mut ratio = f64::INFINITY;
    for a in 0..=8 {
        let alpha = a as f64 / 8.0;
        let law = EnthalpyLaw::new(material, alpha);
        for s in 0..=400 {
            let t = t_lo + (t_hi - t_lo) * s as f64 / 400.0;
            let fl = material.liquid_fraction_unchecked(t);
            let k = material.cell_conductivity(t, alpha, fl);
            ratio = ratio.min(law.capacity(t) / k);
        }
    }
    dt_safety * dx * dx * ratio / 3.0
}

#[inline]
fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Advance the energy equation by `dt`.
pub fn step_energy(
    state: &mut ThermalState,
    domain: &Domain,
    material: &MaterialModel,
    pose: Option<&BeamPose>,
    dt: f64,
    config: &SolverConfig,
) -> Result<()> {
    step_energy_with(&mut EnergyWorkspace::default(), state, domain, material, pose, dt, config)
}

pub(crate) fn step_energy_with(
    ws: &mut EnergyWorkspace,
    state: &mut ThermalState,
    domain: &Domain,
    material: &MaterialModel,
    pose: Option<&BeamPose>,
    dt: f64,
    config: &SolverConfig,
) -> Result<()> {
    let (nx, ny) = (domain.nx, domain.ny);
    let plane = nx * ny;
    let nza = state.active_nz;
    let n = nza * plane;
    let rows = ny * nza;
    let full = state.velocity.is_some() || ws.last != Some((state.step, nza));
    ws.conductivity.resize(domain.len(), 0.0);
    ws.dh.resize(domain.len(), 0.0);
    ws.changed.resize(ny * domain.nz, true);
    ws.todo.resize(ny * domain.nz, true);
    let temp = &state.temperature;

    // Rows needing work this step.
    let source = pose.map(|p| SourceStencil::new(domain, nza, p));
    for r in 0..rows {
        let (j, k) = (r % ny, r / ny);
        ws.todo[r] = full
            || ws.changed[r]
            || (j > 0 && ws.changed[r - 1])
            || (j + 1 < ny && ws.changed[r + 1])
            || (k > 0 && ws.changed[r - ny])
            || (k + 1 < nza && ws.changed[r + ny])
            || source.as_ref().is_some_and(|s| s.touches(j, k));
    }
    for r in 0..rows {
        if full || ws.changed[r] {
            for id in r * nx..(r + 1) * nx {
                ws.conductivity[id] =
                    material.cell_conductivity(temp[id], state.consolidation[id], state.liquid_fraction[id]);
            }
        }
    }
    let kc = &ws.conductivity[..n];
    let dh = &mut ws.dh[..n];

    let diff = dt / (domain.dx * domain.dx);
    for r in 0..rows {
        if !ws.todo[r] {
            continue;
        }
        let (j, k) = (r % ny, r / ny);
        let row = r * nx;
        for i in 0..nx {
            let id = row + i;
            let (kk, tc) = (kc[id], temp[id]);
            let mut flux = 0.0;
            if i > 0 {
                flux += harmonic(kk, kc[id - 1]) * (temp[id - 1] - tc);
            }
            if i + 1 < nx {
                flux += harmonic(kk, kc[id + 1]) * (temp[id + 1] - tc);
            }
            if j > 0 {
                flux += harmonic(kk, kc[id - nx]) * (temp[id - nx] - tc);
            }
            if j + 1 < ny {
                flux += harmonic(kk, kc[id + nx]) * (temp[id + nx] - tc);
            }
            if k > 0 {
                flux += harmonic(kk, kc[id - plane]) * (temp[id - plane] - tc);
            }
            if k + 1 < nza {
                flux += harmonic(kk, kc[id + plane]) * (temp[id + plane] - tc);
            }
            dh[id] = flux * diff;
        }
    }

    if config.boundary_losses {
        let t0 = material.t_ambient;
        let sig = material.stefan_boltzmann * material.emissivity;
        let scale = dt / domain.dx;
        for j in 0..ny {
            let r = (nza - 1) * ny + j;
            if !ws.todo[r] {
                continue;
            }
            for id in r * nx..(r + 1) * nx {
                let t = temp[id];
                let q = material.convection_coeff * (t - t0) + sig * (t.powi(4) - t0.powi(4));
                dh[id] -= q * scale;
            }
        }
    }

    if let Some(s) = &source {
        s.deposit(dh, domain, dt);
    }

    if let Some(vel) = &state.velocity {
        advect(dh, domain, nza, vel, &state.enthalpy, &state.liquid_fraction, dt);
    }

    let cap = config.max_temperature_cap;
    for r in 0..rows {
        let mut row_changed = false;
        if ws.todo[r] {
            for id in r * nx..(r + 1) * nx {
                let alpha = state.consolidation[id];
                let h = state.enthalpy[id] + dh[id];
                if h == state.enthalpy[id] {
                    continue;
                }
                row_changed = true;
                let t = EnthalpyLaw::new(material, alpha).temperature(h);
                if !(t <= cap) {
                    ws.last = None;
                    return Err(Error::Divergence { step: state.step + 1, max_temperature: t });
                }
                state.enthalpy[id] = h;
                state.temperature[id] = t;
                state.liquid_fraction[id] = material.liquid_fraction_unchecked(t);
                if t > state.peak_temperature[id] {
                    state.peak_temperature[id] = t;
                    let a_new = material.consolidation_from_peak(t);
                    if a_new > alpha {
                        state.consolidation[id] = a_new;
                        // Keep T fixed when the property blend changes.
                        state.enthalpy[id] = EnthalpyLaw::new(material, a_new).enthalpy(t);
                    }
                }
            }
        }
        ws.changed[r] = row_changed;
    }
    state.time += dt;
    state.step += 1;
    ws.last = Some((state.step, nza));
    Ok(())
}

/// Cell-averaged volumetric source: the lateral Gaussian integrated exactly
/// over each cell and the depth overlap with the cylinder.
struct SourceStencil {
    i0: usize,
    j0: usize,
    fx: Vec<f64>,
    fy: Vec<f64>,
    /// `(k, fz)` for rows overlapping the cylinder.
    fz: Vec<(usize, f64)>,
    power: f64,
}

impl SourceStencil {
    fn new(domain: &Domain, nza: usize, pose: &BeamPose) -> Self {
        let beam = &pose.beam;
        let dx = domain.dx;
        let z_top = domain.origin[2] + nza as f64 * dx;
        let (i0, fx) = axis_fractions(domain.origin[0], dx, domain.nx, pose.x, beam.radius);
        let (j0, fy) = axis_fractions(domain.origin[1], dx, domain.ny, pose.y, beam.radius);
        let mut fz = Vec::new();
        for k in (0..nza).rev() {
            let z_lo = domain.origin[2] + k as f64 * dx;
            let overlap = ((z_lo + dx).min(z_top) - z_lo.max(z_top - beam.depth)).max(0.0);
            if overlap <= 0.0 {
                break;
            }
            fz.push((k, overlap / beam.depth));
        }
        SourceStencil { i0, j0, fx, fy, fz, power: beam.absorbed_power() }
    }

    fn touches(&self, j: usize, k: usize) -> bool {
        !self.fx.is_empty()
            && j >= self.j0
            && j < self.j0 + self.fy.len()
            && self.fz.iter().any(|&(kk, _)| kk == k)
    }

    fn deposit(&self, dh: &mut [f64], domain: &Domain, dt: f64) {
        let energy = self.power * dt / domain.dx.powi(3);
        for &(k, wz) in &self.fz {
            for (dj, wy) in self.fy.iter().enumerate() {
                let row = (k * domain.ny + self.j0 + dj) * domain.nx + self.i0;
                for (di, wx) in self.fx.iter().enumerate() {
                    dh[row + di] += energy * wx * wy * wz;
                }
            }
        }
    }
}

/// Fractions of a Gaussian of radius `r` centered at `c` landing in each
/// cell of an axis, for cells `lo..hi`.
fn axis_fractions(origin: f64, dx: f64, count: usize, c: f64, r: f64) -> (usize, Vec<f64>) {
    let reach = 4.0 * r;
    let lo = (((c - reach - origin) / dx).floor().max(0.0) as usize).min(count);
    let hi = (((c + reach - origin) / dx).ceil().max(0.0) as usize).min(count);
    let f = (lo..hi)
        .map(|i| {
            let a = origin + i as f64 * dx - c;
            let b = a + dx;
            0.5 * (libm::erf(SQRT_2 * b / r) - libm::erf(SQRT_2 * a / r))
        })
        .collect();
    (lo, f)
}

/// Upwind enthalpy advection across faces shared by two liquid cells.
fn advect(dh: &mut [f64], domain: &Domain, nza: usize, vel: &[Vec<f64>; 3], h: &[f64], fl: &[f64], dt: f64) {
    let (nx, ny) = (domain.nx, domain.ny);
    let strides = [1, nx, nx * ny];
    let counts = [nx, ny, nza];
    let scale = dt / domain.dx;
    for k in 0..nza {
        for j in 0..ny {
            for i in 0..nx {
                let a = (k * ny + j) * nx + i;
                if fl[a] <= 0.0 {
                    continue;
                }
                let pos = [i, j, k];
                for axis in 0..3 {
                    if pos[axis] + 1 >= counts[axis] {
                        continue;
                    }
                    let b = a + strides[axis];
                    if fl[b] <= 0.0 {
                        continue;
                    }
                    let uf = 0.5 * (vel[axis][a] + vel[axis][b]);
                    let f = if uf > 0.0 { uf * h[a] } else { uf * h[b] } * scale;
                    dh[a] -= f;
                    dh[b] += f;
                }
            }
        }
    }
}
