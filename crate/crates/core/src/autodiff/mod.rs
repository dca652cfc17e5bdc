//! Scalar reverse-mode automatic differentiation.

mod scalar;
mod tape;
mod vector;

pub use scalar::Scalar;
pub use tape::{sigmoid, Fault, FaultKind, Gradients, Op, Tape, Var};
pub use vector::{Vec2, Vec3};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("{} at node {} ({})", .0.kind, .0.node, .0.op)]
    Fault(Fault),
    #[error("non-finite input value {value}")]
    NonFiniteInput { value: f64 },
    #[error("{op} expects {expected} arguments, got {got}")]
    Arity { op: Op, expected: usize, got: usize },
    #[error("variable belongs to a different tape")]
    ForeignTape,
}
