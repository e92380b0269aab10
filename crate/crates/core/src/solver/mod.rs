//! Chebyshev pseudoinverse, its emulation and circuit realizations, and the
//! quantity-of-interest pipeline.

pub mod circuits;
pub mod emulate;
pub mod pipeline;
pub mod poly;
pub mod search;

pub use circuits::{lcu_circuit, poly_circuit, qsvt_circuit, PhaseFile, PolyCircuit};
pub use emulate::{apply_poly_matrix, apply_poly_prefix, SparseReference};
pub use pipeline::{qoi_pipeline, Mode, NormEstimate, QoiResult, ScaleLedger, Solver, SolverConfig};
pub use poly::{formula_j, formula_k, inverse_poly, poly_error_profile, ChebyshevPoly};
pub use search::{kappa_eff_search, SearchProblem, SearchResult};
