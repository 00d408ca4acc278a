//! Input jets and parameter gradients for small fully-connected networks.
//!
//! Input dimension is at most two, so derivatives with respect to the inputs
//! are pushed forward alongside the activations ([`jet`]); losses are then
//! composed on a scalar reverse-mode [`tape`], and the resulting jet
//! cotangents are pulled back through the traced forward pass
//! ([`grad_params`]). All arithmetic is `f64`.

mod grad;
mod jet;
mod tape;

pub use grad::{evaluate_objective, finite_diff_oracle, grad_params, JetQuery, JetVars, ParamGradient};
pub use jet::{forward_batch, forward_jet, FnField, Jet2, JetBatch, JetField, PointSet, Tracking, CHUNK};
pub use tape::{Tape, Var};
