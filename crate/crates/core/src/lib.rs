//! Thermal digital twin for laser powder bed fusion of IN625.

pub mod calibrate;
pub mod cli;
pub mod control;
pub mod error;
pub mod hash;
pub mod heat_source;
pub mod hopgd;
pub mod material;
pub mod postproc;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
