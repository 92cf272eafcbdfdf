//! Exact evaluation of a recurrence by dynamic programming, path counting
//! under a term policy, and the random-walk lower-bound estimator.
//!
//! Everything here needs componentwise non-negative, nonzero summands: then
//! every `x - delta` precedes `x` in the box `[0, x]`, and a single sweep in
//! index order fills the table. The solver itself has no such restriction.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::descent::{AnalysisReport, SolveStatus};
use crate::model::{DeltaVector, ValidatedSpec};

/// Largest table built unless the caller asks for more.
pub const DEFAULT_MEMO_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("term `{term}` summand {delta} has a negative entry; exact evaluation needs non-negative summands")]
    UnsupportedDeltas { term: String, delta: DeltaVector },
    #[error("table of {cells} entries exceeds the cap of {cap}")]
    MemoLimit { cells: u128, cap: usize },
    #[error("point has {found} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown term `{0}`")]
    UnknownTerm(String),
    #[error("report has status {0:?}; no growth base to compare against")]
    NoSolution(SolveStatus),
    #[error("basis is empty")]
    EmptyBasis,
}

/// Rejects specs the dynamic program cannot evaluate.
pub fn check_deltas(spec: &ValidatedSpec) -> Result<(), OracleError> {
    for term in spec.terms() {
        for s in &term.summands {
            if !s.is_nonnegative() {
                return Err(OracleError::UnsupportedDeltas {
                    term: term.name.clone(),
                    delta: s.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Dense table over the box `[0, corner]`, last coordinate fastest.
#[derive(Debug, Clone)]
struct BoxIndex {
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl BoxIndex {
    fn new(corner: &[i64], cap: usize) -> Result<Self, OracleError> {
        let dims: Vec<usize> = corner.iter().map(|&c| c as usize + 1).collect();
        let cells = dims.iter().fold(1u128, |acc, &d| acc.saturating_mul(d as u128));
        if cells > cap as u128 {
            return Err(OracleError::MemoLimit { cells, cap });
        }
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Ok(BoxIndex {
            dims,
            strides,
            len: cells as usize,
        })
    }

    fn index(&self, y: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for ((&yk, &dk), &sk) in y.iter().zip(&self.dims).zip(&self.strides) {
            if yk < 0 || yk as usize >= dk {
                return None;
            }
            idx += yk as usize * sk;
        }
        Some(idx)
    }

    /// Index of `y - delta`, or `None` when it leaves the non-negative orthant.
    fn shifted(&self, idx: usize, y: &[usize], delta: &[i64]) -> Option<usize> {
        let mut offset = 0;
        for ((&yk, &dk), &sk) in y.iter().zip(delta).zip(&self.strides) {
            if (dk as usize) > yk {
                return None;
            }
            offset += dk as usize * sk;
        }
        Some(idx - offset)
    }
}

/// Advances an odometer over the box; returns false after the last point.
fn advance(y: &mut [usize], dims: &[usize]) -> bool {
    for k in (0..y.len()).rev() {
        y[k] += 1;
        if y[k] < dims[k] {
            return true;
        }
        y[k] = 0;
    }
    false
}

/// Exact values of `F` on the box `[0, corner]`.
#[derive(Debug, Clone)]
pub struct ValueTable {
    index: BoxIndex,
    values: Vec<BigUint>,
    /// Index of the maximizing term at each point (first one on ties).
    argmax: Vec<u32>,
}

impl ValueTable {
    /// `F(y)`; zero outside the non-negative orthant, `None` beyond the box.
    pub fn get(&self, y: &[i64]) -> Option<&BigUint> {
        if y.iter().any(|&v| v < 0) {
            static ZERO: std::sync::OnceLock<BigUint> = std::sync::OnceLock::new();
            return Some(ZERO.get_or_init(BigUint::zero));
        }
        self.index.index(y).map(|i| &self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_point(spec: &ValidatedSpec, x: &[i64]) -> Result<(), OracleError> {
    if x.len() != spec.dimension() {
        return Err(OracleError::DimensionMismatch {
            expected: spec.dimension(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Fills `F` over `[0, corner]` with at most `cap` entries.
pub fn value_table(spec: &ValidatedSpec, corner: &[i64], cap: usize) -> Result<ValueTable, OracleError> {
    check_deltas(spec)?;
    check_point(spec, corner)?;
    let corner: Vec<i64> = corner.iter().map(|&c| c.max(0)).collect();
    let index = BoxIndex::new(&corner, cap)?;
    let mut values: Vec<BigUint> = Vec::with_capacity(index.len);
    let mut argmax = Vec::with_capacity(index.len);
    let mut y = vec![0usize; corner.len()];
    for idx in 0..index.len {
        if idx == 0 {
            values.push(BigUint::one());
            argmax.push(0);
        } else {
            let mut best = BigUint::zero();
            let mut best_term = 0u32;
            for (i, term) in spec.terms().iter().enumerate() {
                let mut total = BigUint::zero();
                for s in &term.summands {
                    if let Some(j) = index.shifted(idx, &y, s) {
                        total += &values[j];
                    }
                }
                if total > best {
                    best = total;
                    best_term = i as u32;
                }
            }
            values.push(best);
            argmax.push(best_term);
        }
        advance(&mut y, &index.dims);
    }
    Ok(ValueTable { index, values, argmax })
}

/// `F(x)` with `F(0) = 1` and `F(y) = 0` whenever some coordinate of `y` is
/// negative.
pub fn evaluate(spec: &ValidatedSpec, x: &[i64]) -> Result<BigUint, OracleError> {
    evaluate_with_cap(spec, x, DEFAULT_MEMO_CAP)
}

pub fn evaluate_with_cap(spec: &ValidatedSpec, x: &[i64], cap: usize) -> Result<BigUint, OracleError> {
    check_deltas(spec)?;
    check_point(spec, x)?;
    if x.iter().any(|&v| v < 0) {
        return Ok(BigUint::zero());
    }
    let table = value_table(spec, x, cap)?;
    Ok(table.get(x).expect("corner lies in its own box").clone())
}

/// Which term the path graph follows at each point.
#[derive(Debug, Clone, PartialEq)]
pub enum TermPolicy {
    /// A term attaining the maximum in the recurrence.
    Argmax,
    /// The same term everywhere.
    Constant(String),
    /// Explicit choices, with a fallback term elsewhere.
    Assigned { map: HashMap<Vec<i64>, String>, default: String },
}

/// Number of paths from `x` to the origin when every point `y` steps by the
/// summands of its policy term.
pub fn count_paths(spec: &ValidatedSpec, policy: &TermPolicy, x: &[i64]) -> Result<BigUint, OracleError> {
    check_deltas(spec)?;
    check_point(spec, x)?;
    if x.iter().any(|&v| v < 0) {
        return Ok(BigUint::zero());
    }
    let lookup = |name: &str| spec.term_index(name).ok_or_else(|| OracleError::UnknownTerm(name.to_string()));
    let (constant, assigned) = match policy {
        TermPolicy::Argmax => (None, HashMap::new()),
        TermPolicy::Constant(name) => (Some(lookup(name)?), HashMap::new()),
        TermPolicy::Assigned { map, default } => {
            let mut resolved = HashMap::with_capacity(map.len());
            for (point, name) in map {
                resolved.insert(point.clone(), lookup(name)?);
            }
            (Some(lookup(default)?), resolved)
        }
    };
    let argmax_table = match policy {
        TermPolicy::Argmax => Some(value_table(spec, x, DEFAULT_MEMO_CAP)?),
        _ => None,
    };

    let index = BoxIndex::new(x, DEFAULT_MEMO_CAP)?;
    let mut paths: Vec<BigUint> = Vec::with_capacity(index.len);
    let mut y = vec![0usize; x.len()];
    let mut point = vec![0i64; x.len()];
    for idx in 0..index.len {
        if idx == 0 {
            paths.push(BigUint::one());
        } else {
            let term = match &argmax_table {
                Some(t) => t.argmax[idx] as usize,
                None => {
                    for (p, &v) in point.iter_mut().zip(&y) {
                        *p = v as i64;
                    }
                    assigned.get(&point).copied().unwrap_or(constant.expect("non-argmax policy"))
                }
            };
            let mut total = BigUint::zero();
            for s in &spec.terms()[term].summands {
                if let Some(j) = index.shifted(idx, &y, s) {
                    total += &paths[j];
                }
            }
            paths.push(total);
        }
        advance(&mut y, &index.dims);
    }
    Ok(paths.pop().expect("box is non-empty"))
}

/// Step distribution of the random walk: a term is drawn with probability
/// `b`, then one of its summands with probability `c^(-w . delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkModel {
    pub w: Vec<f64>,
    pub c: f64,
    pub terms: Vec<WalkTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkTerm {
    pub name: String,
    pub b: f64,
    pub deltas: Vec<DeltaVector>,
    pub probabilities: Vec<f64>,
}

impl WalkModel {
    /// Builds the walk from the basis of a solved report. Term weights and
    /// summand probabilities are renormalized to sum to one.
    pub fn from_report(spec: &ValidatedSpec, report: &AnalysisReport) -> Result<Self, OracleError> {
        if matches!(report.status, SolveStatus::Infeasible | SolveStatus::Unbounded) || !report.c.is_finite() {
            return Err(OracleError::NoSolution(report.status));
        }
        let mut terms = Vec::new();
        for bt in &report.basis {
            let term = spec.term(&bt.name).ok_or_else(|| OracleError::UnknownTerm(bt.name.clone()))?;
            let mut probabilities: Vec<f64> = term.summands.iter().map(|s| report.c.powf(-report.w.dot_unchecked(s))).collect();
            let total: f64 = probabilities.iter().sum();
            probabilities.iter_mut().for_each(|p| *p /= total);
            terms.push(WalkTerm {
                name: bt.name.clone(),
                b: bt.b,
                deltas: term.summands.clone(),
                probabilities,
            });
        }
        let total_b: f64 = terms.iter().map(|t| t.b).sum();
        if terms.is_empty() || total_b <= 0.0 {
            return Err(OracleError::EmptyBasis);
        }
        terms.iter_mut().for_each(|t| t.b /= total_b);
        Ok(WalkModel {
            w: report.w.0.clone(),
            c: report.c,
            terms,
        })
    }

    fn weight(&self, x: &[i64]) -> f64 {
        self.w.iter().zip(x).map(|(w, &v)| w * v as f64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkOutcome {
    pub reached_origin: bool,
    /// Product of the summand probabilities along the path.
    pub path_probability: f64,
    pub steps: usize,
}

fn pick(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, p) in weights.enumerate() {
        acc += p;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

/// One walk from `start`. It stops at the origin (success), on a negative
/// coordinate, or once `w . x <= 0` away from the origin.
pub fn sample_walk(model: &WalkModel, start: &[i64], rng: &mut ChaCha8Rng) -> WalkOutcome {
    let mut x = start.to_vec();
    let mut path_probability = 1.0;
    let mut steps = 0;
    loop {
        if x.iter().all(|&v| v == 0) {
            return WalkOutcome {
                reached_origin: true,
                path_probability,
                steps,
            };
        }
        if x.iter().any(|&v| v < 0) || model.weight(&x) <= 0.0 {
            return WalkOutcome {
                reached_origin: false,
                path_probability,
                steps,
            };
        }
        let term = &model.terms[pick(rng, model.terms.iter().map(|t| t.b))];
        let j = pick(rng, term.probabilities.iter().copied());
        path_probability *= term.probabilities[j];
        for (xk, dk) in x.iter_mut().zip(term.deltas[j].iter()) {
            *xk -= dk;
        }
        steps += 1;
    }
}

/// Seeded walk `trial` of a batch: one ChaCha stream per trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkEstimate {
    /// `(successes / trials) * c^n`.
    pub estimate: f64,
    pub standard_error: f64,
    pub successes: u64,
    pub trials: u64,
    /// Extremes of the path probability over successful walks.
    pub min_success_probability: Option<f64>,
    pub max_success_probability: Option<f64>,
}

/// Monte Carlo estimate of the expected number of paths from `n t` to the
/// origin in the random policy graph; a statistical lower bound for `F(n t)`.
pub fn lower_bound_estimate(
    spec: &ValidatedSpec,
    report: &AnalysisReport,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<WalkEstimate, OracleError> {
    let model = WalkModel::from_report(spec, report)?;
    let start: Vec<i64> = spec.target().iter().map(|&t| t * n as i64).collect();
    let trials = trials.max(1);
    let mut successes = 0u64;
    let mut lo: Option<f64> = None;
    let mut hi: Option<f64> = None;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let out = sample_walk(&model, &start, &mut rng);
        if out.reached_origin {
            successes += 1;
            lo = Some(lo.map_or(out.path_probability, |v| v.min(out.path_probability)));
            hi = Some(hi.map_or(out.path_probability, |v| v.max(out.path_probability)));
        }
    }
    let scale = model.c.powf(n as f64);
    let p = successes as f64 / trials as f64;
    Ok(WalkEstimate {
        estimate: p * scale,
        standard_error: scale * (p * (1.0 - p) / trials as f64).sqrt(),
        successes,
        trials,
        min_success_probability: lo,
        max_success_probability: hi,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRow {
    pub n: u64,
    pub value: BigUint,
    /// `F(n t)^(1/n)`.
    pub nth_root: f64,
    /// `ln F(n t) - n ln c`.
    pub log_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthTable {
    pub c: f64,
    pub dimension: usize,
    pub basis_size: usize,
    pub rows: Vec<GrowthRow>,
}

/// Natural log of a big integer; `-inf` for zero.
pub fn ln_big(v: &BigUint) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (v >> shift).to_f64().expect("64-bit prefix");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

impl GrowthTable {
    /// The residual stays below its early maximum, up to a factor of two.
    pub fn upper_envelope_holds(&self) -> bool {
        let rows: Vec<&GrowthRow> = self.rows.iter().filter(|r| r.n >= 1).collect();
        if rows.len() < 2 {
            return true;
        }
        let half = rows.len().div_ceil(2);
        let early = rows[..half].iter().map(|r| r.log_residual).fold(f64::NEG_INFINITY, f64::max);
        rows[half..].iter().all(|r| r.log_residual <= early + std::f64::consts::LN_2)
    }

    /// `residual - (1 - d)/2 ln n` stays above its early minimum, up to a
    /// factor of two.
    pub fn lower_envelope_holds(&self) -> bool {
        let shift = (1.0 - self.dimension as f64) / 2.0;
        let adjusted: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.n >= 2)
            .map(|r| r.log_residual - shift * (r.n as f64).ln())
            .collect();
        if adjusted.len() < 2 {
            return adjusted.iter().all(|v| v.is_finite());
        }
        let half = adjusted.len().div_ceil(2);
        let early = adjusted[..half].iter().copied().fold(f64::INFINITY, f64::min);
        early.is_finite() && adjusted[half..].iter().all(|&v| v >= early - std::f64::consts::LN_2)
    }

    /// CSV with columns `n,F,nth_root,log_residual,scaled_residual`, where the
    /// last column subtracts `(|B| - d)/2 ln n`.
    pub fn to_csv(&self) -> String {
        let exponent = (self.basis_size as f64 - self.dimension as f64) / 2.0;
        let mut out = String::from("n,F,nth_root,log_residual,scaled_residual\n");
        for r in &self.rows {
            let scaled = if r.n == 0 {
                r.log_residual
            } else {
                r.log_residual - exponent * (r.n as f64).ln()
            };
            let _ = writeln!(out, "{},{},{:.12},{:.12},{:.12}", r.n, r.value, r.nth_root, r.log_residual, scaled);
        }
        out
    }
}

/// `F(n t)` for `n = 0..=n_max` against the solved growth base.
pub fn growth_diagnostic(spec: &ValidatedSpec, report: &AnalysisReport, n_max: u64) -> Result<GrowthTable, OracleError> {
    if report.status == SolveStatus::Infeasible || !report.c.is_finite() {
        return Err(OracleError::NoSolution(report.status));
    }
    let corner: Vec<i64> = spec.target().iter().map(|&t| t * n_max as i64).collect();
    let table = value_table(spec, &corner, DEFAULT_MEMO_CAP)?;
    let ln_c = report.c.ln();
    let rows = (0..=n_max)
        .map(|n| {
            let x: Vec<i64> = spec.target().iter().map(|&t| t * n as i64).collect();
            let value = table.get(&x).expect("inside the box").clone();
            let ln_f = ln_big(&value);
            GrowthRow {
                n,
                nth_root: if n == 0 { f64::NAN } else { (ln_f / n as f64).exp() },
                log_residual: ln_f - n as f64 * ln_c,
                value,
            }
        })
        .collect();
    Ok(GrowthTable {
        c: report.c,
        dimension: spec.dimension(),
        basis_size: report.basis.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{small_mis, validate, RecurrenceSpec, Term};

    fn binomial() -> ValidatedSpec {
        validate(RecurrenceSpec::new(
            "binom",
            2,
            vec![2, 1],
            vec![Term::new("B", vec![vec![1, 0].into(), vec![1, 1].into()])],
        ))
        .unwrap()
    }

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn small_mis_values() {
        let spec = validate(small_mis(vec![3, 1])).unwrap();
        assert_eq!(evaluate(&spec, &[0, 0]).unwrap(), big(1));
        assert_eq!(evaluate(&spec, &[2, 1]).unwrap(), big(2));
        assert_eq!(evaluate(&spec, &[3, 1]).unwrap(), big(3));
        assert_eq!(evaluate(&spec, &[-1, 3]).unwrap(), big(0));
    }

    #[test]
    fn pascal_triangle() {
        let spec = binomial();
        let table = value_table(&spec, &[10, 10], DEFAULT_MEMO_CAP).unwrap();
        assert_eq!(table.get(&[10, 3]).unwrap(), &big(120));
        assert_eq!(table.get(&[4, 7]).unwrap(), &big(0));
        assert!(table.get(&[11, 0]).is_none());
    }

    #[test]
    fn rejects_negative_deltas() {
        let spec = validate(RecurrenceSpec::new("neg", 1, vec![1], vec![Term::repeated("a", vec![-1], 1)])).unwrap();
        assert!(matches!(evaluate(&spec, &[3]), Err(OracleError::UnsupportedDeltas { .. })));
    }

    #[test]
    fn memo_cap() {
        let spec = binomial();
        assert!(matches!(
            evaluate_with_cap(&spec, &[99, 99], 100),
            Err(OracleError::MemoLimit { cells: 10_000, cap: 100 })
        ));
    }

    #[test]
    fn policy_paths() {
        let spec = validate(small_mis(vec![3, 1])).unwrap();
        assert_eq!(count_paths(&spec, &TermPolicy::Argmax, &[3, 1]).unwrap(), big(3));
        assert_eq!(count_paths(&spec, &TermPolicy::Constant("deg0".into()), &[0, 0]).unwrap(), big(1));
        // deg0 steps by (1,1) only, so (2,0) never reaches the origin.
        assert_eq!(count_paths(&spec, &TermPolicy::Constant("deg0".into()), &[2, 0]).unwrap(), big(0));
        assert!(matches!(
            count_paths(&spec, &TermPolicy::Constant("nope".into()), &[1, 1]),
            Err(OracleError::UnknownTerm(_))
        ));
        let mut map = HashMap::new();
        map.insert(vec![3, 1], "deg2".to_string());
        let policy = TermPolicy::Assigned {
            map,
            default: "deg0".into(),
        };
        assert_eq!(count_paths(&spec, &policy, &[3, 1]).unwrap(), big(3));
    }

    #[test]
    fn chain_walk_is_deterministic() {
        let model = WalkModel {
            w: vec![1.0],
            c: 1.0,
            terms: vec![WalkTerm {
                name: "A".into(),
                b: 1.0,
                deltas: vec![vec![1].into()],
                probabilities: vec![1.0],
            }],
        };
        let out = sample_walk(&model, &[7], &mut trial_rng(1, 0));
        assert!(out.reached_origin);
        assert_eq!(out.path_probability, 1.0);
        assert_eq!(out.steps, 7);
    }

    #[test]
    fn natural_log_of_large_values() {
        let v = BigUint::one() << 3000u32;
        assert!((ln_big(&v) - 3000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert_eq!(ln_big(&BigUint::zero()), f64::NEG_INFINITY);
    }
}
