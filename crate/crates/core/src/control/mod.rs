//! Windowed feed-forward controller that maps melt-pool history and a
//! target to heat-source commands.

mod dataset;
mod mlp;
mod plant;
mod train;

pub use dataset::{build_dataset, window_row, Command, ControlTrace, MinMax, Rows, WindowedDataset, SPLIT};
pub use mlp::{gradient_check, Mlp};
pub use plant::{
    closed_loop, generate_traces, loop_csv, sigmoid_targets, CommandBox, LoopStep, Plant, ProcessConstants, SolverPlant,
    SurrogatePlant,
};
pub use train::{evaluate, loss_csv, train, ControlModel, EvalReport, LossRow, TrainConfig};

/// Default history length.
pub const WINDOW: usize = 6;

#[cfg(test)]
mod tests;
