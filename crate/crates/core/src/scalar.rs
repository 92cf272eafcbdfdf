//! Per-term branching numbers.
//!
//! For a fixed weight vector `w`, term `i` contributes the univariate
//! characteristic function `r_i(c) = 1 - sum_j c^(-w . delta_ij)`, which is
//! strictly increasing in `c > 1` when every exponent is positive. Its unique
//! root `c_i` is the growth base of that term; the recurrence grows no faster
//! than `max_i c_i` in the weighted measure.

use thiserror::Error;

use crate::model::{Term, ValidatedSpec, WeightVector};

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
/// Roots beyond this bound are reported as [`ScalarError::BracketOverflow`].
pub const DEFAULT_BRACKET_CAP: f64 = 18_446_744_073_709_551_616.0; // 2^64

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalarError {
    #[error("root of term `{term}` exceeds the bracket cap {cap:e}")]
    BracketOverflow { term: String, cap: f64 },
}

/// Root of `r_i` for one term at one weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TermRoot {
    /// `c_i` in `[1, +inf]`.
    pub value: f64,
    /// `a_j = w . delta_ij` per summand.
    pub exponents: Vec<f64>,
    pub converged: bool,
    /// `|r_i(value)|`, zero for infinite roots.
    pub residual: f64,
}

impl TermRoot {
    fn infinite(exponents: Vec<f64>, converged: bool) -> Self {
        TermRoot {
            value: f64::INFINITY,
            exponents,
            converged,
            residual: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `1 - sum_j c^(-a_j)`.
pub fn r_from_exponents(exponents: &[f64], c: f64) -> f64 {
    let ln_c = c.ln();
    1.0 - exponents.iter().map(|a| (-a * ln_c).exp()).sum::<f64>()
}

/// Evaluates `r_i(c)` for a term at weights `w`.
pub fn r_eval(term: &Term, w: &WeightVector, c: f64) -> f64 {
    let exps: Vec<f64> = term.summands.iter().map(|s| w.dot_unchecked(s)).collect();
    r_from_exponents(&exps, c)
}

/// Bracketed bisection for the per-term roots.
#[derive(Debug, Clone, Copy)]
pub struct RootFinder {
    pub tol: f64,
    pub bracket_cap: f64,
}

impl Default for RootFinder {
    fn default() -> Self {
        RootFinder {
            tol: DEFAULT_ROOT_TOL,
            bracket_cap: DEFAULT_BRACKET_CAP,
        }
    }
}

/// Per-term roots at one weight vector, in spec term order.
#[derive(Debug, Clone, PartialEq)]
pub struct RootTable {
    pub c: f64,
    pub per_term: Vec<TermRoot>,
}

impl RootTable {
    /// Max minus min over the finite roots.
    pub fn spread(&self) -> f64 {
        let finite = self.per_term.iter().filter(|r| r.is_finite()).map(|r| r.value);
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }
}

impl RootFinder {
    pub fn new(tol: f64) -> Self {
        RootFinder { tol, ..Default::default() }
    }

    pub fn term_root(&self, term: &Term, w: &WeightVector) -> Result<TermRoot, ScalarError> {
        let exponents: Vec<f64> = term.summands.iter().map(|s| w.dot_unchecked(s)).collect();
        self.root_of_exponents(&term.name, exponents)
    }

    pub fn root_of_exponents(&self, name: &str, exponents: Vec<f64>) -> Result<TermRoot, ScalarError> {
        if exponents.len() == 1 {
            let a = exponents[0];
            return Ok(if a > 0.0 {
                TermRoot {
                    value: 1.0,
                    exponents,
                    converged: true,
                    residual: 0.0,
                }
            } else {
                // a == 0 makes r identically zero; treated as unbounded here.
                TermRoot::infinite(exponents, true)
            });
        }
        if exponents.iter().any(|&a| a <= 0.0 || a.is_nan()) {
            return Ok(TermRoot::infinite(exponents, true));
        }

        let r = |c: f64| r_from_exponents(&exponents, c);
        let mut lo = 1.0;
        let mut hi = 2.0;
        while r(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > self.bracket_cap {
                return Err(ScalarError::BracketOverflow {
                    term: name.to_string(),
                    cap: self.bracket_cap,
                });
            }
        }

        let mut converged = false;
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                converged = true;
                break;
            }
            let rm = r(mid);
            if rm < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= self.tol * lo && r(0.5 * (lo + hi)).abs() <= self.tol {
                converged = true;
                break;
            }
        }
        let value = 0.5 * (lo + hi);
        let residual = r(value).abs();
        Ok(TermRoot {
            value,
            exponents,
            converged,
            residual,
        })
    }

    /// `c_w = max_i c_i` together with every per-term root. Bracket overflows
    /// become `+inf` entries flagged as not converged.
    pub fn c_of_w(&self, spec: &ValidatedSpec, w: &WeightVector) -> RootTable {
        let per_term: Vec<TermRoot> = spec
            .terms()
            .iter()
            .map(|term| {
                self.term_root(term, w).unwrap_or_else(|_| {
                    let exps = term.summands.iter().map(|s| w.dot_unchecked(s)).collect();
                    TermRoot::infinite(exps, false)
                })
            })
            .collect();
        let c = per_term.iter().map(|r| r.value).fold(1.0, f64::max);
        RootTable { c, per_term }
    }

    /// True when every term satisfies `r_i(c) >= 0`, i.e. `c_w <= c`, without
    /// solving for the roots.
    pub fn all_roots_at_most(&self, spec: &ValidatedSpec, w: &WeightVector, c: f64) -> bool {
        spec.terms().iter().all(|term| {
            let exps: Vec<f64> = term.summands.iter().map(|s| w.dot_unchecked(s)).collect();
            if exps.len() == 1 {
                exps[0] > 0.0
            } else {
                exps.iter().all(|&a| a > 0.0) && c.is_finite() && r_from_exponents(&exps, c) >= 0.0
            }
        })
    }
}

/// Root of one term with the default bracket cap.
pub fn term_root(term: &Term, w: &WeightVector, tol: f64) -> Result<TermRoot, ScalarError> {
    RootFinder::new(tol).term_root(term, w)
}

/// `c_w` and the per-term roots with the default bracket cap.
pub fn c_of_w(spec: &ValidatedSpec, w: &WeightVector, tol: f64) -> RootTable {
    RootFinder::new(tol).c_of_w(spec, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{small_mis, validate, DeltaVector};

    fn term(summands: &[&[i64]]) -> Term {
        Term::new("t", summands.iter().map(|s| DeltaVector(s.to_vec())).collect())
    }

    // Weights from the closed form T(n,k) = (4/3)^n (81/64)^k at base 3.
    fn mis_weights() -> WeightVector {
        WeightVector::new(vec![(4.0f64 / 3.0).ln() / 3f64.ln(), (81.0f64 / 64.0).ln() / 3f64.ln()])
    }

    #[test]
    fn r_eval_examples() {
        let t = term(&[&[1], &[2]]);
        assert!((r_eval(&t, &WeightVector::new(vec![1.0]), 2.0) - 0.25).abs() < 1e-15);

        let w = WeightVector::new(vec![0.261860, 0.214377]);
        let t = Term::repeated("deg2", vec![3, 1], 3);
        assert!(r_eval(&t, &w, 3.0).abs() < 1e-4);
        let t = term(&[&[4, 1], &[1, 0]]);
        assert!(r_eval(&t, &w, 3.0).abs() < 1e-4);
        assert!(r_eval(&t, &mis_weights(), 3.0).abs() < 1e-14);
    }

    #[test]
    fn golden_ratio_root() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let root = term_root(&term(&[&[1], &[2]]), &WeightVector::new(vec![1.0]), 1e-12).unwrap();
        assert!((root.value - phi).abs() < 1e-9);
        assert!(root.converged);
        assert!(root.residual <= 1e-12);
    }

    #[test]
    fn degenerate_roots() {
        let single = term_root(&term(&[&[1, 1]]), &WeightVector::new(vec![0.5, 0.5]), 1e-12).unwrap();
        assert_eq!(single.value, 1.0);
        let two = term_root(&term(&[&[1], &[1]]), &WeightVector::new(vec![1.0]), 1e-12).unwrap();
        assert!((two.value - 2.0).abs() < 1e-11);
        let neg = term_root(&term(&[&[1], &[-1]]), &WeightVector::new(vec![1.0]), 1e-12).unwrap();
        assert!(neg.value.is_infinite());
        let flat = term_root(&term(&[&[0, 1]]), &WeightVector::new(vec![1.0, 0.0]), 1e-12).unwrap();
        assert!(flat.value.is_infinite());
        let zero_multi = term_root(&term(&[&[1, 0], &[0, 1]]), &WeightVector::new(vec![1.0, 0.0]), 1e-12).unwrap();
        assert!(zero_multi.value.is_infinite());
    }

    #[test]
    fn bracket_overflow() {
        let w = WeightVector::new(vec![1e-30]);
        let err = term_root(&term(&[&[1], &[1]]), &w, 1e-12).unwrap_err();
        assert!(matches!(err, ScalarError::BracketOverflow { .. }));
        let spec = validate(crate::model::RecurrenceSpec::new(
            "o",
            1,
            vec![1],
            vec![Term::new("t", vec![vec![1].into(), vec![1].into()])],
        ))
        .unwrap();
        let table = c_of_w(&spec, &w, 1e-12);
        assert!(table.c.is_infinite());
        assert!(!table.per_term[0].converged);
    }

    #[test]
    fn small_mis_roots_at_closed_form_weights() {
        let spec = validate(small_mis(vec![3, 1])).unwrap();
        let table = c_of_w(&spec, &mis_weights(), 1e-12);
        assert!((table.c - 3.0).abs() < 1e-9);
        let deg2 = spec.term_index("deg2").unwrap();
        let deg3 = spec.term_index("deg3").unwrap();
        assert!((table.per_term[deg2].value - 3.0).abs() < 1e-9);
        assert!((table.per_term[deg3].value - 3.0).abs() < 1e-9);

        let table = c_of_w(&spec, &WeightVector::new(vec![1.0 / 3.0, 0.0]), 1e-12);
        assert!((table.per_term[deg2].value - 3.0).abs() < 1e-9);
        assert!((table.c - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_weights_give_infinity() {
        let spec = validate(small_mis(vec![3, 1])).unwrap();
        let table = c_of_w(&spec, &WeightVector::new(vec![1.0, -3.0]), 1e-12);
        assert!(table.c.is_infinite());
    }

    #[test]
    fn root_test_matches_roots() {
        let spec = validate(small_mis(vec![4, 1])).unwrap();
        let w = WeightVector::new(vec![0.2, 0.2]);
        let finder = RootFinder::default();
        let c = finder.c_of_w(&spec, &w).c;
        assert!(finder.all_roots_at_most(&spec, &w, c * (1.0 + 1e-9)));
        assert!(!finder.all_roots_at_most(&spec, &w, c * (1.0 - 1e-9)));
    }
}
