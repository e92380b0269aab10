//! Block encodings as annotated circuits, their composition rules and
//! flag-based projection checks.

mod block;
mod projection;

pub use block::{add, adjoint, block_diag, controlled_block_diag, hconcat, multiply, tensor, vstack, BlockEncoding, MAX_EXTRACT_QUBITS};
pub use projection::{cnot_pi, fresh_name, less_than_cubes, range_poly, Cube, Projection, Span};
