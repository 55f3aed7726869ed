//! Dense tensors, CSR sparse matrices, a reverse-mode tape and Adam.
//!
//! Everything learnable in the crate is expressed through [`Tape`]. A tape
//! is built fresh for every forward pass; parameters live outside it in a
//! [`ParamSet`] and are bound to the tape as leaves for the duration of a
//! step.

mod adam;
mod params;
mod sparse;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use params::{BoundParams, ParamSet};
pub use sparse::Csr;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
