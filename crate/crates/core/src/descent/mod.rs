//! Optimal weight vector by smooth quasiconvex programming.
//!
//! Each term's root `q_i(w) = c_i` is quasiconvex in `w`, so `c_w = max_i q_i`
//! is quasiconvex too and can be minimized over the hyperplane `w . t = 1` by
//! local improvement:
//!
//! 1. collect the terms whose root is within the current tolerance of `c_w`;
//! 2. find a direction `v` (perpendicular to `t`) with `v . D_i > 0` for each
//!    of their descent normals `D_i = sum_j c^(-w . delta_ij) delta_ij`; the
//!    min-norm point of the projected normals is such a direction, and when it
//!    vanishes its convex coefficients certify optimality;
//! 3. doubling line search on `c_w` along `v`, halving the final step.
//!
//! An outer loop shrinks the active-set tolerance geometrically down to the
//! target tolerance.

mod feasible;
mod min_norm;

use std::collections::BTreeMap;

use thiserror::Error;

pub use feasible::{escape_direction, feasible_start, InfeasibilityWitness, WitnessEntry};
pub use min_norm::{min_norm_point, MinNormError, MinNormPoint};

use crate::model::{Term, ValidatedSpec, WeightVector};
use crate::scalar::{RootFinder, RootTable, TermRoot};
use min_norm::{dot, norm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescentError {
    #[error("target tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    MinNorm(#[from] MinNormError),
}

/// Probabilities and descent normal of one term at `(w, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TermGradient {
    /// `p_j = c^(-w . delta_j)`.
    pub probabilities: Vec<f64>,
    /// `D = sum_j p_j delta_j`.
    pub direction: Vec<f64>,
    /// `D` minus its component along `t`.
    pub projected: Vec<f64>,
}

/// `v - (v . t / t . t) t`.
pub fn project_perp(v: &[f64], t: &[i64]) -> Vec<f64> {
    let tf: Vec<f64> = t.iter().map(|&x| x as f64).collect();
    let tt = dot(&tf, &tf);
    let s = dot(v, &tf) / tt;
    v.iter().zip(&tf).map(|(vk, tk)| vk - s * tk).collect()
}

/// Descent normal of a term's root. Moving `w` along any `v` with
/// `v . D > 0` lowers the term's root for small steps.
pub fn term_gradient(term: &Term, w: &WeightVector, c: f64, target: &[i64]) -> TermGradient {
    let d = w.dim();
    let ln_c = c.ln();
    let probabilities: Vec<f64> = term.summands.iter().map(|s| (-w.dot_unchecked(s) * ln_c).exp()).collect();
    let mut direction = vec![0.0; d];
    for (p, s) in probabilities.iter().zip(&term.summands) {
        for (dk, &sk) in direction.iter_mut().zip(s.iter()) {
            *dk += p * sk as f64;
        }
    }
    let projected = project_perp(&direction, target);
    TermGradient {
        probabilities,
        direction,
        projected,
    }
}

/// Gradient used for a term inside the loop. Terms with an infinite root
/// push the offending summand weights back toward positive.
fn loop_gradient(term: &Term, w: &WeightVector, root: &TermRoot, target: &[i64]) -> TermGradient {
    if root.is_finite() {
        return term_gradient(term, w, root.value, target);
    }
    let d = w.dim();
    let mut direction = vec![0.0; d];
    for (a, s) in root.exponents.iter().zip(&term.summands) {
        if *a <= 0.0 {
            for (dk, &sk) in direction.iter_mut().zip(s.iter()) {
                *dk += sk as f64;
            }
        }
    }
    let projected = project_perp(&direction, target);
    TermGradient {
        probabilities: vec![0.0; term.summands.len()],
        direction,
        projected,
    }
}

/// Result of the direction search over the active terms.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSearch {
    /// Improving direction, absent when the origin is (within tolerance) in
    /// the hull of the projected normals.
    pub direction: Option<Vec<f64>>,
    pub min_norm: MinNormPoint,
}

pub fn find_direction(active: &[TermGradient], tol: f64) -> Result<DirectionSearch, MinNormError> {
    let projected: Vec<Vec<f64>> = active.iter().map(|g| g.projected.clone()).collect();
    let min_norm = min_norm_point(&projected)?;
    let direction = (min_norm.norm() > tol).then(|| min_norm.point.clone());
    Ok(DirectionSearch { direction, min_norm })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearch {
    pub w_next: WeightVector,
    pub roots: RootTable,
    pub improved: bool,
    /// Largest accepted probe; a good first probe for the next search.
    pub step: f64,
}

const MAX_DOUBLINGS: usize = 64;

/// Largest `|w| |t|` the line search moves to: 1000 times the smallest norm
/// on the hyperplane. Beyond it `w . t` is no longer resolved to `1e-12`.
pub const WEIGHT_NORM_CAP: f64 = 1e3;

fn offset(w: &WeightVector, v: &[f64], eps: f64, target: &[i64]) -> WeightVector {
    let mut next = WeightVector::new(w.iter().zip(v).map(|(a, b)| a + eps * b).collect());
    next.project_to_hyperplane(target);
    next
}

/// Doubling search for the largest step with `c_w(w + eps v) <= c_current`,
/// then halves it. `initial_step` is the first probe.
pub fn line_search(
    spec: &ValidatedSpec,
    finder: &RootFinder,
    w: &WeightVector,
    v: &[f64],
    c_current: f64,
    initial_step: f64,
) -> LineSearch {
    let t = spec.target();
    let stay = || LineSearch {
        w_next: w.clone(),
        roots: finder.c_of_w(spec, w),
        improved: false,
        step: initial_step,
    };
    let vn = norm(v);
    if vn == 0.0 || !c_current.is_finite() {
        return stay();
    }
    let t_norm = t.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let accept = |eps: f64| {
        let next = offset(w, v, eps, t);
        norm(&next) * t_norm <= WEIGHT_NORM_CAP && finder.all_roots_at_most(spec, &next, c_current)
    };
    let min_step = 1e-17 * norm(w).max(1.0) / vn;

    let mut eps = if initial_step.is_finite() && initial_step > 0.0 {
        initial_step
    } else {
        norm(w).max(1.0) / vn * 1e-2
    };
    if accept(eps) {
        for _ in 0..MAX_DOUBLINGS {
            if !accept(2.0 * eps) {
                break;
            }
            eps *= 2.0;
        }
    } else {
        loop {
            eps *= 0.5;
            if eps < min_step {
                return stay();
            }
            if accept(eps) {
                break;
            }
        }
    }
    let largest = eps;

    // The halved step lies in the same sublevel set; fall back to the full
    // step if rounding in the root solve says otherwise.
    for step in [0.5 * largest, largest] {
        let w_next = offset(w, v, step, t);
        let roots = finder.c_of_w(spec, &w_next);
        if roots.c <= c_current {
            return LineSearch {
                w_next,
                roots,
                improved: true,
                step: largest,
            };
        }
    }
    stay()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    /// Final round ended with the origin in the hull of the projected
    /// normals of the active terms.
    Converged,
    /// Final round ended on stalled improvement or the iteration limit.
    StalledWithinTolerance,
    /// No weight vector makes every summand weight positive.
    Infeasible,
    /// Along some direction inside the hyperplane every root tends to 1, so
    /// `c = 1` is the infimum but no finite `w` attains it.
    Unbounded,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::StalledWithinTolerance => "StalledWithinTolerance",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::Unbounded => "Unbounded",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Converged" => Some(SolveStatus::Converged),
            "StalledWithinTolerance" => Some(SolveStatus::StalledWithinTolerance),
            "Infeasible" => Some(SolveStatus::Infeasible),
            "Unbounded" => Some(SolveStatus::Unbounded),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisTerm {
    pub name: String,
    pub b: f64,
}

/// Outcome of [`solve`]: the growth base, its weight vector, every term's
/// root and the critical terms with their certificate coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub c: f64,
    pub w: WeightVector,
    pub per_term: BTreeMap<String, TermRoot>,
    pub basis: Vec<BasisTerm>,
    pub iterations: usize,
    pub outer_rounds: usize,
    pub status: SolveStatus,
    /// Norm of the min-norm point of the projected basis normals.
    pub certificate_norm: f64,
    pub witness: Option<InfeasibilityWitness>,
}

impl AnalysisReport {
    pub fn basis_coefficient(&self, name: &str) -> Option<f64> {
        self.basis.iter().find(|b| b.name == name).map(|b| b.b)
    }

    pub fn is_basis(&self, name: &str) -> bool {
        self.basis_coefficient(name).is_some()
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub target_tol: f64,
    pub finder: RootFinder,
    pub seed: u64,
    pub max_iterations: usize,
    /// Consecutive small improvements that end a round.
    pub stall_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            target_tol: 1e-9,
            finder: RootFinder::default(),
            seed: 0x5eed,
            max_iterations: 20_000,
            stall_window: 5,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(target_tol: f64) -> Self {
        SolverConfig {
            target_tol,
            ..Default::default()
        }
    }
}

/// One accepted iterate, passed to the observer of [`solve_observed`].
#[derive(Debug)]
pub struct Iterate<'a> {
    pub w: &'a WeightVector,
    pub roots: &'a RootTable,
    pub round: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RoundEnd {
    OriginInHull,
    Stalled,
    Limit,
}

fn active_set(roots: &RootTable, tol: f64) -> Vec<usize> {
    (0..roots.per_term.len())
        .filter(|&i| roots.per_term[i].value >= roots.c - tol)
        .collect()
}

fn active_gradients(spec: &ValidatedSpec, w: &WeightVector, roots: &RootTable, active: &[usize]) -> Vec<TermGradient> {
    active
        .iter()
        .map(|&i| loop_gradient(&spec.terms()[i], w, &roots.per_term[i], spec.target()))
        .collect()
}

/// Minimizes `c_w` over `w . t = 1`.
pub fn solve(spec: &ValidatedSpec, config: &SolverConfig) -> Result<AnalysisReport, DescentError> {
    solve_observed(spec, config, |_| {})
}

/// [`solve`], reporting the starting point and every accepted iterate.
pub fn solve_observed<F>(spec: &ValidatedSpec, config: &SolverConfig, mut observer: F) -> Result<AnalysisReport, DescentError>
where
    F: FnMut(&Iterate<'_>),
{
    let target_tol = config.target_tol;
    if !(target_tol > 0.0 && target_tol.is_finite()) {
        return Err(DescentError::BadTolerance(target_tol));
    }
    let finder = &config.finder;

    let mut w = match feasible_start(spec, config.seed) {
        Ok(w) => w,
        Err(witness) => return Ok(infeasible_report(spec, witness)),
    };
    let mut roots = finder.c_of_w(spec, &w);
    if let Some(v) = escape_direction(spec) {
        observer(&Iterate {
            w: &w,
            roots: &roots,
            round: 0,
            tol: target_tol,
        });
        return Ok(AnalysisReport {
            c: 1.0,
            per_term: named_roots(spec, roots),
            w,
            basis: Vec::new(),
            iterations: 0,
            outer_rounds: 0,
            status: SolveStatus::Unbounded,
            certificate_norm: norm(&v),
            witness: None,
        });
    }

    let mut tol = roots.spread().max(0.1);
    if !tol.is_finite() {
        tol = 0.1;
    }
    observer(&Iterate {
        w: &w,
        roots: &roots,
        round: 0,
        tol,
    });

    let mut iterations = 0;
    let mut rounds = 0;
    let mut step = f64::NAN;
    let mut last_end = RoundEnd::Stalled;

    while roots.c.is_finite() {
        rounds += 1;
        let mut small_steps = 0;
        last_end = loop {
            if iterations >= config.max_iterations {
                break RoundEnd::Limit;
            }
            let active = active_set(&roots, tol);
            let grads = active_gradients(spec, &w, &roots, &active);
            let search = find_direction(&grads, tol)?;
            let Some(v) = search.direction else {
                break RoundEnd::OriginInHull;
            };
            let ls = line_search(spec, finder, &w, &v, roots.c, step);
            if !ls.improved {
                break RoundEnd::Stalled;
            }
            iterations += 1;
            let relative = (roots.c - ls.roots.c) / roots.c;
            w = ls.w_next;
            roots = ls.roots;
            step = ls.step;
            observer(&Iterate {
                w: &w,
                roots: &roots,
                round: rounds,
                tol,
            });
            if relative < tol / 8.0 {
                small_steps += 1;
                if small_steps >= config.stall_window {
                    break RoundEnd::Stalled;
                }
            } else {
                small_steps = 0;
            }
        };
        if last_end == RoundEnd::Limit || tol <= target_tol {
            break;
        }
        tol = (tol / 4.0).max(target_tol);
    }

    // Basis and certificate at the final point.
    let mut basis = Vec::new();
    let mut certificate_norm = f64::INFINITY;
    if roots.c.is_finite() {
        let active = active_set(&roots, target_tol);
        let grads = active_gradients(spec, &w, &roots, &active);
        let mn = min_norm_point(&grads.iter().map(|g| g.projected.clone()).collect::<Vec<_>>())?;
        certificate_norm = mn.norm();
        for (&i, &b) in active.iter().zip(&mn.coefficients) {
            if b > 0.0 {
                basis.push(BasisTerm {
                    name: spec.terms()[i].name.clone(),
                    b,
                });
            }
        }
    }
    let status = if last_end == RoundEnd::OriginInHull && tol <= target_tol {
        SolveStatus::Converged
    } else {
        SolveStatus::StalledWithinTolerance
    };
    Ok(AnalysisReport {
        c: roots.c,
        w,
        per_term: named_roots(spec, roots),
        basis,
        iterations,
        outer_rounds: rounds,
        status,
        certificate_norm,
        witness: None,
    })
}

fn named_roots(spec: &ValidatedSpec, roots: RootTable) -> BTreeMap<String, TermRoot> {
    spec.terms()
        .iter()
        .zip(roots.per_term)
        .map(|(term, root)| (term.name.clone(), root))
        .collect()
}

fn infeasible_report(spec: &ValidatedSpec, witness: InfeasibilityWitness) -> AnalysisReport {
    let d = spec.dimension();
    let w = WeightVector::new(vec![f64::NAN; d]);
    let per_term = spec
        .terms()
        .iter()
        .map(|term| {
            (
                term.name.clone(),
                TermRoot {
                    value: f64::INFINITY,
                    exponents: vec![f64::NAN; term.summands.len()],
                    converged: false,
                    residual: 0.0,
                },
            )
        })
        .collect();
    AnalysisReport {
        c: f64::INFINITY,
        w,
        per_term,
        basis: Vec::new(),
        iterations: 0,
        outer_rounds: 0,
        status: SolveStatus::Infeasible,
        certificate_norm: f64::INFINITY,
        witness: Some(witness),
    }
}
