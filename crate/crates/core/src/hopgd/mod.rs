//! Separated-variable (HOPGD) surrogate over the axes (e, P1, P2, P3).

mod fit;
mod grid;
mod sampler;

pub use fit::{evaluate, fit, FitOptions, SeparatedModel};
pub use grid::{design_grid, insert_node, sample_grid, suggest_refinement, Refinement, SampleGrid, Tensor4};
pub use sampler::{Provenance, SolverSampler, Surrogate, SurrogateConfig};
