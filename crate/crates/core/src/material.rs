//! IN625 thermophysical model and process constants.
//!
//! All quantities are SI. Linear temperature laws are stored as `(a, b)`
//! pairs meaning `a * T + b`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Identifier that selects the built-in IN625 table.
pub const IN625: &str = "IN625";

/// Physical state used to pick a property branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseState {
    Powder,
    Solid,
    Liquid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MaterialModel {
    pub solid_density: f64,
    pub liquid_density: f64,
    pub powder_density: f64,
    #[serde(rename = "T_solidus")]
    pub t_solidus: f64,
    #[serde(rename = "T_liquidus")]
    pub t_liquidus: f64,
    /// Latent heat of fusion, J/kg.
    pub latent_heat: f64,
    pub cp_solid_poly: (f64, f64),
    pub cp_liquid: f64,
    pub cp_powder_poly: (f64, f64),
    pub k_solid_poly: (f64, f64),
    pub k_liquid: f64,
    pub k_powder: f64,
    pub viscosity: f64,
    pub thermal_expansion: f64,
    pub surface_tension: f64,
    /// dγ/dT, N/(m·K).
    pub marangoni_coeff: f64,
    pub emissivity: f64,
    /// W/(m²·K).
    pub convection_coeff: f64,
    #[serde(rename = "T_ambient")]
    pub t_ambient: f64,
    #[serde(rename = "T_reference")]
    pub t_reference: f64,
    #[serde(rename = "T_preheat")]
    pub t_preheat: f64,
    pub stefan_boltzmann: f64,
    pub gravity: f64,
    /// Primary dendrite arm spacing used by the Darcy sink, m.
    pub dendrite_spacing_c: f64,
    #[serde(rename = "darcy_epsilon_B")]
    pub darcy_epsilon_b: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self::in625()
    }
}

impl MaterialModel {
    /// IN625 values with the tabulated mm-based Stefan–Boltzmann constant
    /// (5.67e-14 W/(mm²·K⁴)) converted to m².
    pub fn in625() -> Self {
        MaterialModel {
            solid_density: 8440.0,
            liquid_density: 7640.0,
            powder_density: 4330.0,
            t_solidus: 1563.0,
            t_liquidus: 1623.0,
            latent_heat: 290.0e3,
            cp_solid_poly: (0.2441, 338.39),
            cp_liquid: 709.25,
            cp_powder_poly: (0.2508, 357.70),
            k_solid_poly: (0.0163, 4.5847),
            k_liquid: 30.078,
            k_powder: 0.995,
            viscosity: 7.0e-3,
            thermal_expansion: 5.0e-5,
            surface_tension: 1.8,
            marangoni_coeff: -3.8e-4,
            emissivity: 0.4,
            convection_coeff: 10.0,
            t_ambient: 295.0,
            t_reference: 295.0,
            t_preheat: 353.0,
            stefan_boltzmann: 5.67e-8,
            gravity: 9.8,
            dendrite_spacing_c: 1.0e-6,
            darcy_epsilon_b: 1.0e-6,
        }
    }

    /// Resolve a material reference: the built-in identifier or a JSON path.
    pub fn load(reference: &str) -> Result<Self> {
        if reference.eq_ignore_ascii_case(IN625) {
            return Ok(Self::in625());
        }
        Self::from_json_file(Path::new(reference))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: MaterialModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("solid_density", self.solid_density),
            ("liquid_density", self.liquid_density),
            ("powder_density", self.powder_density),
            ("cp_liquid", self.cp_liquid),
            ("k_liquid", self.k_liquid),
            ("k_powder", self.k_powder),
            ("viscosity", self.viscosity),
            ("T_ambient", self.t_ambient),
            ("T_solidus", self.t_solidus),
        ];
        for (name, v) in positive {
            ensure_finite(name, v)?;
            if v <= 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.latent_heat < 0.0 || !self.latent_heat.is_finite() {
            return Err(Error::InvalidInput("latent_heat must be non-negative".into()));
        }
        if self.t_solidus >= self.t_liquidus {
            return Err(Error::InvalidInput(format!(
                "T_solidus ({}) must be below T_liquidus ({})",
                self.t_solidus, self.t_liquidus
            )));
        }
        // Polynomial branches must stay positive over the solid range.
        for (name, (a, b)) in [
            ("cp_solid_poly", self.cp_solid_poly),
            ("cp_powder_poly", self.cp_powder_poly),
            ("k_solid_poly", self.k_solid_poly),
        ] {
            let lo = a * self.t_reference.min(self.t_ambient) + b;
            let hi = a * self.t_liquidus + b;
            if lo <= 0.0 || hi <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} evaluates non-positive inside [{}, {}] K",
                    self.t_ambient, self.t_liquidus
                )));
            }
        }
        if self.emissivity < 0.0 || self.convection_coeff < 0.0 {
            return Err(Error::InvalidInput("boundary loss coefficients must be >= 0".into()));
        }
        Ok(())
    }

    /// Thermal conductivity, W/(m·K).
    pub fn conductivity(&self, t: f64, state: PhaseState) -> Result<f64> {
        ensure_finite("temperature", t)?;
        Ok(match state {
            PhaseState::Powder => self.k_powder,
            PhaseState::Solid => self.k_solid_poly.0 * t + self.k_solid_poly.1,
            PhaseState::Liquid => self.k_liquid,
        })
    }

    /// Specific heat capacity, J/(kg·K).
    pub fn specific_heat(&self, t: f64, state: PhaseState) -> Result<f64> {
        ensure_finite("temperature", t)?;
        Ok(match state {
            PhaseState::Powder => self.cp_powder_poly.0 * t + self.cp_powder_poly.1,
            PhaseState::Solid => self.cp_solid_poly.0 * t + self.cp_solid_poly.1,
            PhaseState::Liquid => self.cp_liquid,
        })
    }

    pub fn density(&self, state: PhaseState) -> f64 {
        match state {
            PhaseState::Powder => self.powder_density,
            PhaseState::Solid => self.solid_density,
            PhaseState::Liquid => self.liquid_density,
        }
    }

    /// Linear liquid fraction ramp across the mushy range.
    pub fn liquid_fraction(&self, t: f64) -> Result<f64> {
        ensure_finite("temperature", t)?;
        Ok(self.liquid_fraction_unchecked(t))
    }

    #[inline]
    pub(crate) fn liquid_fraction_unchecked(&self, t: f64) -> f64 {
        if t <= self.t_solidus {
            0.0
        } else if t >= self.t_liquidus {
            1.0
        } else {
            (t - self.t_solidus) / (self.t_liquidus - self.t_solidus)
        }
    }

    /// Consolidation factor from the local peak temperature, clamped to [0, 1].
    #[inline]
    pub fn consolidation_from_peak(&self, t_peak: f64) -> f64 {
        ((t_peak - self.t_solidus) / (self.t_liquidus - self.t_solidus)).clamp(0.0, 1.0)
    }

    /// Conductivity of a cell with consolidation `alpha` and liquid fraction
    /// `f_l`: powder/solid blend, then mixed with the liquid value.
    #[inline]
    pub(crate) fn cell_conductivity(&self, t: f64, alpha: f64, f_l: f64) -> f64 {
        let solid = self.k_solid_poly.0 * t.min(self.t_liquidus) + self.k_solid_poly.1;
        let bulk = self.k_powder + (solid - self.k_powder) * alpha;
        bulk + (self.k_liquid - bulk) * f_l
    }
}

/// Linear blend between a powder value and a bulk value.
pub fn blended_property(powder_value: f64, bulk_value: f64, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!(
            "consolidation factor must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(powder_value + (bulk_value - powder_value) * alpha)
}
