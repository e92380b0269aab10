//! Multilevel-preconditioned finite elements on quantum circuits.
//!
//! `fem` is the dense classical oracle. `circuit` is a gate IR with a
//! statevector simulator, `encoding` the block-encoding calculus on top of it,
//! `cf` the concrete gradient/transfer/coefficient encodings, `prep` state
//! preparation, `solver` the Chebyshev pseudoinverse and QoI pipeline, and
//! `experiments` the CSV producing drivers used by the CLI.

pub mod cf;
pub mod circuit;
pub mod encoding;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod linalg;
pub mod prep;
pub mod solver;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
