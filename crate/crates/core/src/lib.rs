//! Structurally-conditioned counterfactual subgraph generation for
//! out-of-distribution link prediction.
//!
//! The crate is `no_std` (with `alloc`) and carries every algorithmic piece
//! of the pipeline:
//!
//! * [`graph`] – CSR graphs, link heuristics, enclosing-subgraph extraction
//!   with zero-one labels and block-diagonal batching.
//! * [`split`] – heuristic-threshold structural-shift splits.
//! * [`autodiff`] – dense tensors, a reverse-mode tape and Adam.
//! * [`gnn`] – GCN encoder, inner-product link scorer, pre-training, Hits@K.
//! * [`sivi`] – the semi-implicit variational graph auto-encoder.
//! * [`flex`] – adversarial co-training of the two models.
//! * [`analysis`] – structural alignment, degree-bias scans and sweeps.
//!
//! File formats, persistence and the command line live in the `flexlp`
//! companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod autodiff;
mod error;
pub mod flex;
pub mod gnn;
pub mod graph;
mod math;
pub mod rng;
pub mod sivi;
pub mod split;
pub mod synth;

pub use error::{Error, Result};
