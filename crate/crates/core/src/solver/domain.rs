use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform voxel grid. Cell `(i, j, k)` spans
/// `origin + [i, j, k]·dx .. origin + [i+1, j+1, k+1]·dx`, with x fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub origin: [f64; 3],
    /// Cells that start as loose powder.
    pub powder_layer_mask: Vec<bool>,
    /// Top face of the initially active region.
    pub z_top: f64,
    /// The face `y = origin[1]` is a mirror plane; only `y ≥ origin[1]` is
    /// simulated and lateral extents are doubled.
    #[serde(default)]
    pub symmetric_y: bool,
}

impl Domain {
    /// Fully consolidated box whose top face is the initial surface.
    pub fn new(nx: usize, ny: usize, nz: usize, dx: f64, origin: [f64; 3], symmetric_y: bool) -> Result<Self> {
        let d = Domain {
            nx,
            ny,
            nz,
            dx,
            origin,
            powder_layer_mask: vec![false; nx * ny * nz],
            z_top: origin[2] + nz as f64 * dx,
            symmetric_y,
        };
        d.validate()?;
        Ok(d)
    }

    /// Plate of the given size with its top surface at z = 0 and the scan
    /// line at y = 0, starting at x = 0.
    pub fn single_track(dx: f64, length: f64, width: f64, height: f64, symmetric_y: bool) -> Result<Self> {
        let cells = |len: f64| (len / dx - 1e-9).ceil().max(1.0) as usize;
        let nx = cells(length);
        let nz = cells(height);
        let (ny, y0) = if symmetric_y {
            (cells(0.5 * width), 0.0)
        } else {
            let ny = cells(width);
            (ny, -0.5 * ny as f64 * dx)
        };
        Self::new(nx, ny, nz, dx, [0.0, y0, -(nz as f64) * dx], symmetric_y)
    }

    /// Mark the top `cells` rows of the initial surface as powder.
    pub fn with_powder_top(mut self, cells: usize) -> Self {
        let top = self.initial_active_nz();
        for k in top.saturating_sub(cells)..top {
            for j in 0..self.ny {
                for i in 0..self.nx {
                    let id = self.idx(i, j, k);
                    self.powder_layer_mask[id] = true;
                }
            }
        }
        self
    }

    /// Append `n_layers` powder layers above the current top. They become
    /// active as the scan path rises.
    pub fn with_layers(mut self, n_layers: usize, layer_thickness: f64) -> Result<Self> {
        let per_layer = (layer_thickness / self.dx).round() as usize;
        if per_layer == 0 || ((per_layer as f64) * self.dx - layer_thickness).abs() > 1e-6 * layer_thickness {
            return Err(Error::InvalidInput(format!(
                "layer thickness {layer_thickness} is not a multiple of dx {}",
                self.dx
            )));
        }
        let extra = n_layers * per_layer;
        let plane = self.nx * self.ny;
        self.nz += extra;
        self.powder_layer_mask.extend(std::iter::repeat_n(true, extra * plane));
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::InvalidInput(format!("dx must be positive, got {}", self.dx)));
        }
        if self.nx < 4 || self.ny < 4 || self.nz < 4 {
            return Err(Error::InvalidInput(format!(
                "grid {}x{}x{} needs at least 4 cells per direction",
                self.nx, self.ny, self.nz
            )));
        }
        if self.powder_layer_mask.len() != self.len() {
            return Err(Error::InvalidInput("powder mask size does not match the grid".into()));
        }
        let active = (self.z_top - self.origin[2]) / self.dx;
        if (active - active.round()).abs() > 1e-6 || active.round() < 1.0 || active.round() as usize > self.nz {
            return Err(Error::InvalidInput(format!("z_top {} is not a cell face inside the grid", self.z_top)));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }

    pub fn initial_active_nz(&self) -> usize {
        ((self.z_top - self.origin[2]) / self.dx).round() as usize
    }

    /// Cell-center coordinate along `axis`.
    #[inline]
    pub fn center(&self, axis: usize, index: usize) -> f64 {
        self.origin[axis] + (index as f64 + 0.5) * self.dx
    }

    /// Number of active rows when the top surface sits at `z`.
    pub fn active_rows_for(&self, z: f64) -> usize {
        (((z - self.origin[2]) / self.dx).round().max(1.0) as usize).min(self.nz)
    }

    /// Column index containing `x`, clamped into the grid.
    pub fn column_of(&self, x: f64) -> usize {
        (((x - self.origin[0]) / self.dx).floor().max(0.0) as usize).min(self.nx - 1)
    }

    pub fn extent(&self) -> [f64; 3] {
        [self.nx as f64 * self.dx, self.ny as f64 * self.dx, self.nz as f64 * self.dx]
    }
}
