use crate::error::Result;
use crate::material::MaterialModel;
use crate::solver::Domain;

/// Piecewise enthalpy law `H(T; α)` of one cell, volumetric and relative to
/// `T_reference`.
///
/// Below the solidus the heat capacity is the α-blend of the powder and
/// solid `ρ·c_p` laws; across the mushy range it ramps linearly to the
/// liquid value with the latent heat spread uniformly; above the liquidus it
/// is constant.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EnthalpyLaw {
    a_s: f64,
    b_s: f64,
    c_l: f64,
    latent: f64,
    ts: f64,
    tl: f64,
    tr: f64,
    h_s: f64,
    h_l: f64,
    slope_m: f64,
    c_ts: f64,
}

impl EnthalpyLaw {
    #[inline]
    pub(crate) fn new(m: &MaterialModel, alpha: f64) -> Self {
        let (ap, bp) = m.cp_powder_poly;
        let (as_, bs) = m.cp_solid_poly;
        let a_p = m.powder_density * ap;
        let b_p = m.powder_density * bp;
        let a_s = a_p + (m.solid_density * as_ - a_p) * alpha;
        let b_s = b_p + (m.solid_density * bs - b_p) * alpha;
        let c_l = m.liquid_density * m.cp_liquid;
        let rho = m.powder_density + (m.solid_density - m.powder_density) * alpha;
        let (ts, tl, tr) = (m.t_solidus, m.t_liquidus, m.t_reference);
        let dt_m = tl - ts;
        let latent = rho * m.latent_heat / dt_m;
        let h_s = 0.5 * a_s * (ts * ts - tr * tr) + b_s * (ts - tr);
        let c_ts = a_s * ts + b_s;
        let slope_m = (c_l - c_ts) / dt_m;
        let h_l = h_s + (c_ts + latent) * dt_m + 0.5 * slope_m * dt_m * dt_m;
        EnthalpyLaw { a_s, b_s, c_l, latent, ts, tl, tr, h_s, h_l, slope_m, c_ts }
    }

    #[inline]
    pub(crate) fn enthalpy(&self, t: f64) -> f64 {
        if t <= self.ts {
            0.5 * self.a_s * (t * t - self.tr * self.tr) + self.b_s * (t - self.tr)
        } else if t < self.tl {
            let x = t - self.ts;
            self.h_s + (self.c_ts + self.latent) * x + 0.5 * self.slope_m * x * x
        } else {
            self.h_l + self.c_l * (t - self.tl)
        }
    }

    #[inline]
    pub(crate) fn temperature(&self, h: f64) -> f64 {
        if h <= self.h_s {
            self.tr + quad_root(self.a_s, self.a_s * self.tr + self.b_s, h)
        } else if h < self.h_l {
            self.ts + quad_root(self.slope_m, self.c_ts + self.latent, h - self.h_s)
        } else {
            self.tl + (h - self.h_l) / self.c_l
        }
    }

    /// Effective volumetric heat capacity dH/dT.
    #[inline]
    pub(crate) fn capacity(&self, t: f64) -> f64 {
        if t <= self.ts {
            self.a_s * t + self.b_s
        } else if t < self.tl {
            self.c_ts + self.latent + self.slope_m * (t - self.ts)
        } else {
            self.c_l
        }
    }
}

/// Root `x` of `a/2·x² + b·x = k` continuous in `a → 0`.
#[inline]
fn quad_root(a: f64, b: f64, k: f64) -> f64 {
    let disc = (b * b + 2.0 * a * k).max(0.0);
    2.0 * k / (b + disc.sqrt())
}

/// Cell-centered fields of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    pub temperature: Vec<f64>,
    /// Volumetric enthalpy, J/m³.
    pub enthalpy: Vec<f64>,
    pub liquid_fraction: Vec<f64>,
    pub consolidation: Vec<f64>,
    pub peak_temperature: Vec<f64>,
    /// Cell velocities (u, v, w), fluid mode only.
    pub velocity: Option<[Vec<f64>; 3]>,
    pub time: f64,
    pub step: u64,
    /// Number of active rows from the bottom; rows above are not simulated.
    pub active_nz: usize,
}

impl ThermalState {
    /// Uniform start at `T_preheat`, powder where the mask says so.
    pub fn initial(domain: &Domain, material: &MaterialModel, with_velocity: bool) -> Self {
        Self::uniform(domain, material, material.t_preheat, with_velocity)
    }

    pub fn uniform(domain: &Domain, material: &MaterialModel, t: f64, with_velocity: bool) -> Self {
        let n = domain.len();
        let consolidation: Vec<f64> =
            domain.powder_layer_mask.iter().map(|&p| if p { 0.0 } else { 1.0 }).collect();
        let enthalpy = consolidation.iter().map(|&a| EnthalpyLaw::new(material, a).enthalpy(t)).collect();
        let fl = material.liquid_fraction_unchecked(t);
        ThermalState {
            temperature: vec![t; n],
            enthalpy,
            liquid_fraction: vec![fl; n],
            consolidation,
            peak_temperature: vec![t; n],
            velocity: with_velocity.then(|| [vec![0.0; n], vec![0.0; n], vec![0.0; n]]),
            time: 0.0,
            step: 0,
            active_nz: domain.initial_active_nz(),
        }
    }

    /// Reset one cell to temperature `t`, keeping its consolidation.
    pub fn set_temperature(&mut self, material: &MaterialModel, id: usize, t: f64) {
        self.temperature[id] = t;
        self.enthalpy[id] = EnthalpyLaw::new(material, self.consolidation[id]).enthalpy(t);
        self.liquid_fraction[id] = material.liquid_fraction_unchecked(t);
        self.peak_temperature[id] = self.peak_temperature[id].max(t);
    }

    /// Activate rows up to `rows` at the preheat temperature.
    pub(crate) fn activate_rows(&mut self, domain: &Domain, material: &MaterialModel, rows: usize) {
        let plane = domain.nx * domain.ny;
        for k in self.active_nz..rows.min(domain.nz) {
            for id in k * plane..(k + 1) * plane {
                self.consolidation[id] = if domain.powder_layer_mask[id] { 0.0 } else { 1.0 };
                self.peak_temperature[id] = material.t_preheat;
                self.set_temperature(material, id, material.t_preheat);
            }
        }
        self.active_nz = self.active_nz.max(rows.min(domain.nz));
    }

    /// Total enthalpy of active cells per unit cell volume.
    pub fn total_enthalpy(&self, domain: &Domain) -> f64 {
        let end = self.active_nz * domain.nx * domain.ny;
        self.enthalpy[..end].iter().sum()
    }

    pub fn max_temperature(&self) -> f64 {
        self.temperature.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Temperature of volumetric enthalpy `h` for a cell with consolidation
/// `alpha`.
pub fn temperature_from_enthalpy(material: &MaterialModel, alpha: f64, h: f64) -> f64 {
    EnthalpyLaw::new(material, alpha).temperature(h)
}

/// Volumetric enthalpy of a cell relative to `T_reference`.
pub fn enthalpy_from_temperature(material: &MaterialModel, alpha: f64, t: f64) -> Result<f64> {
    crate::error::ensure_finite("temperature", t)?;
    Ok(EnthalpyLaw::new(material, alpha).enthalpy(t))
}
