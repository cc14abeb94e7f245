//! Dense-matrix reverse-mode automatic differentiation.
//!
//! A [`Tape`] records primitive operations as they are evaluated. Calling
//! [`Tape::backward`] on a `1 x 1` node walks the record in reverse and
//! returns the gradient with respect to every leaf registered with
//! [`Tape::leaf`]. Values registered with [`Tape::constant`] take part in the
//! forward pass but receive no gradient, and subgraphs that depend only on
//! constants are skipped during the reverse sweep.
//!
//! ```
//! use mvdis::autodiff::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let w = tape.leaf(Matrix::scalar(3.0));
//! let y = tape.mul(w, w).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(w).unwrap().scalar_value(), Some(6.0));
//! ```

mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::{finite_difference_check, GradCheckEntry, GradCheckReport};
pub use matrix::Matrix;
pub(crate) use matrix::gemm;
pub use tape::{Gradients, OpKind, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("{op}: incompatible input shapes {shapes:?}")]
    Dimension {
        op: &'static str,
        shapes: Vec<(usize, usize)>,
    },
    #[error("{op}: expected a different number of inputs, got {got}")]
    Arity { op: &'static str, got: usize },
    #[error("{op}: input {value} outside the operation's domain")]
    Domain { op: &'static str, value: f64 },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward requires a 1x1 output, got {shape:?}")]
    NotScalar { shape: (usize, usize) },
    #[error("matrix of {rows}x{cols} cannot hold {len} values")]
    Shape {
        rows: usize,
        cols: usize,
        len: usize,
    },
}
