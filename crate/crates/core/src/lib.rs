//! Numerical toolkit for the heat equation driven by the Grushin operator
//! `½(Δ_x + |x|²Δ_y)` with a local power source and a weakly singular memory
//! source.
//!
//! Modules, bottom up:
//! - [`exponents`]: critical exponents and the global-existence classifier.
//! - [`kernel`]: pointwise heat kernel via the Mehler kernel.
//! - [`grid`]: sampled functions, norms and file formats.
//! - [`semigroup`]: application of the heat semigroup to grid functions.
//! - [`memory`]: product-integration weights for the memory integral.
//! - [`solver`]: Duhamel time marching, Picard iteration and residuals.
//! - [`comparison`]: ordering and supersolution checks.
//! - [`scan`]: exponent scans with refinement-checked blow-up labels.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comparison;
mod fixed;
pub mod error;
pub mod exponents;
pub mod floats;
pub mod grid;
pub mod kernel;
pub mod memory;
pub mod quadrature;
pub mod scan;
pub mod semigroup;
pub mod solver;

pub use error::{Error, Result};
pub use exponents::{
    CaseTag, ExponentReport, GrushinDims, ProblemParams, QWindow, RationalParams, RegimeVerdict,
};
pub use grid::{GridFunction, GridSpec, Profile};
pub use kernel::{KernelEval, KernelQuery, MehlerQuery, QuadratureRule, QuadratureSpec};
pub use memory::{MemoryWeights, TimeGrid};
pub use semigroup::{PropagatorKind, SemigroupOperatorCache};
pub use solver::{Scheme, SolveConfig, SolveStatus, SolveTrace};
pub use scan::{CellOutcome, CellStatus};
