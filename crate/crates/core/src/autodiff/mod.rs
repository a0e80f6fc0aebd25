//! Reverse-mode differentiation and its finite-difference verifier.

mod gradcheck;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport, REL_ERROR_FLOOR};
pub(crate) use tape::cross_entropy_value;
pub use tape::{Gradients, Node, ParamId, Tape, Var, PROB_FLOOR};
