//! Graph neural networks with analytic gradients, transductive SGD, and
//! computable generalization-gap certificates.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod nn;
pub mod optim;
pub mod rng;

pub use error::{Error, ErrorClass, Result};
