//! Worst-case growth analysis of multivariate backtracking recurrences
//! `F(x) = max_i sum_j F(x - delta_ij)`.
//!
//! The pipeline: [`model`] validates a recurrence, [`scalar`] computes the
//! per-term branching numbers for a weight vector, [`descent`] finds the
//! weight vector minimizing the overall growth base, [`certify`] checks a
//! rounded solution with outward-rounded interval arithmetic, and [`oracle`]
//! evaluates the recurrence exactly for cross-checks.

pub mod certify;
pub mod descent;
pub mod io;
pub mod model;
pub mod oracle;
pub mod scalar;
