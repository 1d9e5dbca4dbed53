//! Arbitrary-precision scalar rootfinding with Inverse Cubic Iteration.
//!
//! Inverse Cubic Iteration fits a cubic Hermite interpolant to the inverse
//! function through two iterates and reads off its value at zero. Rewritten
//! for stability, each step is a residual-weighted average of a Newton step
//! from each of the two points and one secant step through both, so it costs
//! one function and one derivative evaluation per iteration, like Newton, but
//! converges with order `1 + √3`.
//!
//! Modules, bottom up:
//!
//! - [`mpscalar`]: MPFR-backed real and complex scalars at a chosen decimal precision
//! - [`expr`]: function text parser, symbolic derivative, evaluator
//! - [`kernel`]: the pure step formulas
//! - [`solve`]: the iteration driver and its trace
//! - [`diagnostics`]: ratio sequence, order estimates, constant fit, prediction
//! - [`basins`]: basin-of-attraction rasters and PPM output

pub mod basins;
pub mod diagnostics;
pub mod expr;
pub mod kernel;
pub mod mpscalar;
pub mod solve;

pub use mpscalar::{MPComplex, MPReal, Precision, Scalar, ScalarError};
