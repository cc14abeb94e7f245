//! Encoders, shared trunk, projection heads, decoders and discriminators,
//! plus the Adam optimizer and checkpoint I/O.
//!
//! Every sub-network is a plain [`Mlp`]. For a forward pass the parameters
//! are recorded on a [`Tape`](crate::autodiff::Tape) with
//! [`ModelParams::bind`], choosing per [`ParamGroup`] whether they are
//! trainable leaves or frozen constants.

mod adam;
pub mod checkpoint;
mod mlp;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use mlp::{Activation, BoundMlp, Dense, Mlp, MlpSpec};
pub use params::{Blueprint, BoundParams, GradMap, ModelParams, NamedParams, ParamGroup};

use crate::autodiff::AutodiffError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("network config: {0}")]
    Config(String),
    #[error("view index {index} out of range for {views} views")]
    ViewIndex { index: usize, views: usize },
    #[error("{what} for view {view} has width {got}, expected {expected}")]
    Width {
        what: &'static str,
        view: usize,
        expected: usize,
        got: usize,
    },
    #[error("gradient for unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("gradient for `{name}` is {grad:?} but the parameter is {param:?}")]
    GradShape {
        name: String,
        param: (usize, usize),
        grad: (usize, usize),
    },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}
