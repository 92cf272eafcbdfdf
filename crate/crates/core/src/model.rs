//! Recurrence data model.
//!
//! A recurrence `F(x) = max_i sum_j F(x - delta_ij)` is described by a
//! dimension, a set of named terms (each a multiset of integer delta vectors)
//! and a target direction `t`. The quantity of interest is `F(n t)`.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;

use thiserror::Error;

/// Default tolerance for `|w . t - 1|` on normalized weight vectors.
pub const HYPERPLANE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: String, expected: usize, found: usize },
    #[error("term `{term}` contains the zero delta vector")]
    ZeroDelta { term: String },
    #[error("target vector is zero")]
    ZeroTarget,
    #[error("recurrence has no terms")]
    EmptyTermList,
    #[error("term `{term}` has no summands")]
    EmptyTerm { term: String },
    #[error("duplicate term name `{0}`")]
    DuplicateTermName(String),
    #[error("invalid term name {0:?}: names must be non-empty without whitespace or `=`")]
    InvalidTermName(String),
    #[error("dimension must be positive")]
    ZeroDimension,
}

/// One recursive call's decrease in the instance measure.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeltaVector(pub Vec<i64>);

impl DeltaVector {
    pub fn new(entries: Vec<i64>) -> Self {
        DeltaVector(entries)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&e| e >= 0)
    }
}

impl Deref for DeltaVector {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for DeltaVector {
    fn from(v: Vec<i64>) -> Self {
        DeltaVector(v)
    }
}

impl fmt::Display for DeltaVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// One case of the case analysis: the recursive calls it makes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub name: String,
    pub summands: Vec<DeltaVector>,
}

impl Term {
    pub fn new(name: impl Into<String>, summands: Vec<DeltaVector>) -> Self {
        Term {
            name: name.into(),
            summands,
        }
    }

    /// `count` copies of the same summand, as in `3*[(3,1)]`.
    pub fn repeated(name: impl Into<String>, delta: Vec<i64>, count: usize) -> Self {
        Term::new(name, vec![DeltaVector(delta); count])
    }
}

/// Unvalidated recurrence description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecurrenceSpec {
    pub name: String,
    pub dimension: usize,
    pub variable_names: Vec<String>,
    pub terms: Vec<Term>,
    pub target: Vec<i64>,
}

impl RecurrenceSpec {
    /// Builds a spec with default variable names `x0, x1, ...`.
    pub fn new(name: impl Into<String>, dimension: usize, target: Vec<i64>, terms: Vec<Term>) -> Self {
        RecurrenceSpec {
            name: name.into(),
            dimension,
            variable_names: (0..dimension).map(|k| format!("x{k}")).collect(),
            terms,
            target,
        }
    }
}

/// A recurrence whose invariants have been checked.
///
/// Terms are sorted by name and the summands of each term are sorted
/// lexicographically; multiplicities are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedSpec(RecurrenceSpec);

impl Deref for ValidatedSpec {
    type Target = RecurrenceSpec;
    fn deref(&self) -> &RecurrenceSpec {
        &self.0
    }
}

impl ValidatedSpec {
    pub fn dimension(&self) -> usize {
        self.0.dimension
    }

    pub fn target(&self) -> &[i64] {
        &self.0.target
    }

    pub fn terms(&self) -> &[Term] {
        &self.0.terms
    }

    pub fn term(&self, name: &str) -> Option<&Term> {
        self.0.terms.iter().find(|t| t.name == name)
    }

    pub fn term_index(&self, name: &str) -> Option<usize> {
        self.0.terms.iter().position(|t| t.name == name)
    }

    pub fn into_inner(self) -> RecurrenceSpec {
        self.0
    }

    /// Iterator over every summand with its term index.
    pub fn summands(&self) -> impl Iterator<Item = (usize, &DeltaVector)> {
        self.0
            .terms
            .iter()
            .enumerate()
            .flat_map(|(i, t)| t.summands.iter().map(move |s| (i, s)))
    }

    /// Stable textual form used for hashing and certificates.
    pub fn canonical_text(&self) -> String {
        let mut out = format!("d={};t={}", self.0.dimension, DeltaVector(self.0.target.clone()));
        for term in &self.0.terms {
            out.push(';');
            out.push_str(&term.name);
            out.push(':');
            for (j, s) in term.summands.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&s.to_string());
            }
        }
        out
    }
}

pub(crate) fn valid_term_name(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(|ch| ch.is_whitespace() || ch.is_control() || ch == '=')
}

/// Checks the recurrence invariants and canonicalizes term and summand order.
pub fn validate(raw: RecurrenceSpec) -> Result<ValidatedSpec, ModelError> {
    let d = raw.dimension;
    if d == 0 {
        return Err(ModelError::ZeroDimension);
    }
    if raw.variable_names.len() != d {
        return Err(ModelError::DimensionMismatch {
            context: "variable names".into(),
            expected: d,
            found: raw.variable_names.len(),
        });
    }
    if raw.target.len() != d {
        return Err(ModelError::DimensionMismatch {
            context: "target".into(),
            expected: d,
            found: raw.target.len(),
        });
    }
    if raw.terms.is_empty() {
        return Err(ModelError::EmptyTermList);
    }
    let mut seen = BTreeSet::new();
    for term in &raw.terms {
        if !valid_term_name(&term.name) {
            return Err(ModelError::InvalidTermName(term.name.clone()));
        }
        if !seen.insert(term.name.as_str()) {
            return Err(ModelError::DuplicateTermName(term.name.clone()));
        }
        if term.summands.is_empty() {
            return Err(ModelError::EmptyTerm { term: term.name.clone() });
        }
        for s in &term.summands {
            if s.len() != d {
                return Err(ModelError::DimensionMismatch {
                    context: format!("summand {s} of term `{}`", term.name),
                    expected: d,
                    found: s.len(),
                });
            }
            if s.is_zero() {
                return Err(ModelError::ZeroDelta { term: term.name.clone() });
            }
        }
    }
    if raw.target.iter().all(|&e| e == 0) {
        return Err(ModelError::ZeroTarget);
    }

    let mut spec = raw;
    for term in &mut spec.terms {
        term.summands.sort();
    }
    spec.terms.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(ValidatedSpec(spec))
}

/// Real weights per instance feature.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn new(entries: Vec<f64>) -> Self {
        WeightVector(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Inner product with an integer vector.
    pub fn dot(&self, v: &[i64]) -> Result<f64, ModelError> {
        if v.len() != self.0.len() {
            return Err(ModelError::DimensionMismatch {
                context: "weight inner product".into(),
                expected: self.0.len(),
                found: v.len(),
            });
        }
        Ok(self.dot_unchecked(v))
    }

    pub(crate) fn dot_unchecked(&self, v: &[i64]) -> f64 {
        self.0.iter().zip(v).map(|(w, &x)| w * x as f64).sum()
    }

    pub fn is_normalized(&self, target: &[i64], tol: f64) -> bool {
        self.dot(target).map(|s| (s - 1.0).abs() <= tol).unwrap_or(false)
    }

    /// Moves `w` onto the hyperplane `w . t = 1` along `t`.
    pub fn project_to_hyperplane(&mut self, target: &[i64]) {
        let tt: f64 = target.iter().map(|&x| (x * x) as f64).sum();
        let excess = self.dot_unchecked(target) - 1.0;
        for (w, &x) in self.0.iter_mut().zip(target) {
            *w -= excess * x as f64 / tt;
        }
    }
}

impl Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Checked inner product of a weight vector with a delta or target vector.
pub fn dot(w: &WeightVector, v: &[i64]) -> Result<f64, ModelError> {
    w.dot(v)
}

/// The cardinality-bounded maximal independent set recurrence in `(n, k)`.
pub fn small_mis(target: Vec<i64>) -> RecurrenceSpec {
    RecurrenceSpec {
        name: "smallmis".into(),
        dimension: 2,
        variable_names: vec!["n".into(), "k".into()],
        terms: vec![
            Term::repeated("deg0", vec![1, 1], 1),
            Term::repeated("deg1", vec![2, 1], 2),
            Term::repeated("deg2", vec![3, 1], 3),
            Term::new("deg3", vec![DeltaVector(vec![4, 1]), DeltaVector(vec![1, 0])]),
        ],
        target,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_mis_is_accepted() {
        let spec = validate(small_mis(vec![3, 1])).unwrap();
        assert_eq!(spec.terms().len(), 4);
        assert_eq!(spec.term("deg2").unwrap().summands.len(), 3);
        assert_eq!(spec.target(), &[3, 1]);
    }

    #[test]
    fn zero_delta_rejected() {
        let spec = RecurrenceSpec::new("z", 2, vec![1, 1], vec![Term::new("a", vec![vec![0, 0].into()])]);
        assert_eq!(validate(spec), Err(ModelError::ZeroDelta { term: "a".into() }));
    }

    #[test]
    fn wrong_length_summand_rejected() {
        let spec = RecurrenceSpec::new("z", 2, vec![1, 1], vec![Term::new("a", vec![vec![1, 2, 3].into()])]);
        assert!(matches!(validate(spec), Err(ModelError::DimensionMismatch { found: 3, .. })));
    }

    #[test]
    fn structural_errors() {
        let empty = RecurrenceSpec::new("e", 1, vec![1], vec![]);
        assert_eq!(validate(empty), Err(ModelError::EmptyTermList));
        let zt = RecurrenceSpec::new("z", 1, vec![0], vec![Term::repeated("a", vec![1], 1)]);
        assert_eq!(validate(zt), Err(ModelError::ZeroTarget));
        let dup = RecurrenceSpec::new(
            "d",
            1,
            vec![1],
            vec![Term::repeated("a", vec![1], 1), Term::repeated("a", vec![2], 1)],
        );
        assert_eq!(validate(dup), Err(ModelError::DuplicateTermName("a".into())));
        let bad = RecurrenceSpec::new("b", 1, vec![1], vec![Term::repeated("a b", vec![1], 1)]);
        assert!(matches!(validate(bad), Err(ModelError::InvalidTermName(_))));
        let noterm = RecurrenceSpec::new("n", 1, vec![1], vec![Term::new("a", vec![])]);
        assert!(matches!(validate(noterm), Err(ModelError::EmptyTerm { .. })));
    }

    #[test]
    fn canonicalization_sorts_and_keeps_duplicates() {
        let spec = RecurrenceSpec::new(
            "c",
            2,
            vec![1, 1],
            vec![
                Term::new("z", vec![vec![2, 0].into(), vec![1, 1].into(), vec![2, 0].into()]),
                Term::new("a", vec![vec![1, 0].into()]),
                Term::new("b", vec![vec![1, 0].into()]),
            ],
        );
        let v = validate(spec).unwrap();
        let names: Vec<_> = v.terms().iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "z"]);
        assert_eq!(
            v.term("z").unwrap().summands,
            vec![DeltaVector(vec![1, 1]), DeltaVector(vec![2, 0]), DeltaVector(vec![2, 0])]
        );
        let again = validate(v.clone().into_inner()).unwrap();
        assert_eq!(again, v);
    }

    #[test]
    fn dot_examples() {
        let w = WeightVector::new(vec![0.5, 0.5]);
        assert_eq!(dot(&w, &[1, 1]).unwrap(), 1.0);
        let w = WeightVector::new(vec![1.0, 0.0]);
        assert_eq!(dot(&w, &[0, 3]).unwrap(), 0.0);
        let w = WeightVector::new(vec![0.261860, 0.214377]);
        assert!((dot(&w, &[3, 1]).unwrap() - 0.999957).abs() < 1e-12);
        assert!(dot(&w, &[1, 2, 3]).is_err());
    }

    #[test]
    fn hyperplane_projection() {
        let mut w = WeightVector::new(vec![0.7, -0.2, 0.4]);
        let t = [2, 1, -3];
        w.project_to_hyperplane(&t);
        assert!(w.is_normalized(&t, HYPERPLANE_TOL));
    }
}
