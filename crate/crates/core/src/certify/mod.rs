//! Rigorous upper-bound certificates.
//!
//! A candidate `(w, c)` with rational entries is accepted when, in exact
//! rational arithmetic, every summand weight `w . delta` is positive,
//! `w . t <= 1` and `c >= 1`, and, in outward-rounded dyadic interval
//! arithmetic, `1 - sum_j c^(-w . delta_ij) >= 0` for every term. Acceptance
//! implies `F(n t) = O(c^n)`: `F(n t) <= F_w(n (w . t))` and
//! `c^(n (w . t)) <= c^n`.

mod certificate;
pub mod dyadic;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use certificate::{parse_certificate, Certificate, CertificateParseError};
pub use dyadic::{Dyadic, DyadicInterval, Round};

use crate::descent::{AnalysisReport, SolveStatus};
use crate::model::{DeltaVector, ValidatedSpec};

pub const DEFAULT_BITS: u32 = 64;
pub const MAX_BITS: u32 = 1024;
/// Fractional bits of the rounded weight vector.
const WEIGHT_FRAC_BITS: u32 = 32;
/// Fractional bits of the rounded growth base.
const BASE_FRAC_BITS: u32 = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("term `{term}` is not certified: residual {residual} is negative")]
    Rejected { term: String, residual: DyadicInterval },
    #[error("term `{term}` summand {delta} has non-positive weight {weight}")]
    NonPositiveWeight {
        term: String,
        delta: DeltaVector,
        weight: BigRational,
    },
    #[error("weight vector has w . t = {0} > 1")]
    TargetWeightAboveOne(BigRational),
    #[error("growth base {0} is below one")]
    BaseBelowOne(BigRational),
    #[error("weight vector has {found} entries, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("exponent must be positive, got {0}")]
    NonPositiveExponent(BigRational),
    #[error("interval base must be at least one")]
    BaseIntervalBelowOne,
    #[error("{bits} bits do not decide the sign of the residual of term `{term}`")]
    PrecisionExhausted { term: String, bits: u32 },
    #[error("report has status {0:?}; nothing to round")]
    NoSolution(SolveStatus),
    #[error("certificate was issued for a different recurrence")]
    SpecMismatch,
}

/// Accepted upper bound `F(n t) = O(c^n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedBound {
    pub w: Vec<BigRational>,
    pub c: BigRational,
    pub precision_bits: u32,
    /// Enclosure of `r_i(c)` per term, in spec order. Every `lo` is `>= 0`.
    pub per_term_residual: Vec<(String, DyadicInterval)>,
}

fn working_precision(bits: u32, exponent: &BigRational) -> u64 {
    bits as u64 + 32 + exponent.numer().bits() + exponent.denom().bits()
}

/// Smallest power of two whose `q`-th power is at least `x`.
fn root_upper_bracket(x: &Dyadic, q: u64) -> Dyadic {
    let log2_ceil = x.exponent() + x.precision() as i64;
    let k = (log2_ceil.max(0) as u64).div_ceil(q);
    Dyadic::new(BigInt::one() << k, 0)
}

/// Natural log of a positive dyadic, to `f64` accuracy.
fn approx_ln(x: &Dyadic) -> f64 {
    let bits = x.precision();
    let shift = bits.saturating_sub(60);
    let m = (x.mantissa() >> shift).to_f64().unwrap_or(f64::NAN);
    m.ln() + (x.exponent() + shift as i64) as f64 * std::f64::consts::LN_2
}

/// Newton approximation of `x^(1/q)` to about `prec` bits. `None` when the
/// iteration does not settle, e.g. for very large `q`.
fn newton_root(x: &Dyadic, q: &BigUint, prec: u64) -> Option<Dyadic> {
    let log = approx_ln(x) / q.to_f64()?;
    if !log.is_finite() {
        return None;
    }
    let k = (log / std::f64::consts::LN_2).floor();
    let frac = (log - k * std::f64::consts::LN_2).exp();
    let mut m = Dyadic::new(BigInt::from((frac * 2f64.powi(52)).round() as i64), k as i64 - 52);
    let work = prec + 8;
    let q_dyadic = Dyadic::new(BigInt::from(q.clone()), 0);
    let settled = Dyadic::new(BigInt::one(), -(prec as i64 + 4));
    for _ in 0..16 {
        let y = m.pow_round(q, work, Round::Down);
        let step = &(&m * &(x - &y)) * &(&q_dyadic * &y).recip(work, Round::Down);
        let next = (&m + &step.round(work, Round::Down)).round(work, Round::Down);
        let change = &next - &m;
        m = next;
        let change = if change.is_negative() { -&change } else { change };
        if change <= &m * &settled {
            return Some(m);
        }
    }
    None
}

/// Certified `[lo, hi]` with `lo^q <= x.lo` and `hi^q >= x.hi`, from Newton
/// approximations widened by `2^-(prec-6)`.
fn newton_root_interval(x: &DyadicInterval, q: &BigUint, prec: u64) -> Option<DyadicInterval> {
    let widen = Dyadic::new(BigInt::one(), -(prec as i64 - 6));
    let lo = newton_root(x.lo(), q, prec)?;
    // Roots of `x >= 1` are at least 1.
    let lo = (&lo - &(&lo * &widen)).round(prec, Round::Down).max(Dyadic::one());
    let hi = newton_root(x.hi(), q, prec)?;
    let hi = (&hi + &(&hi * &widen)).round(prec, Round::Up);
    let ok = lo.pow_round(q, prec, Round::Up) <= *x.lo() && hi.pow_round(q, prec, Round::Down) >= *x.hi();
    ok.then(|| DyadicInterval::new(lo, hi))
}

/// Enclosure of `c^(p/q)` for `c >= 1` and `p/q > 0`, at least `bits`
/// relative bits wide.
pub fn interval_pow(c: &DyadicInterval, exponent: &BigRational, bits: u32) -> Result<DyadicInterval, CertifyError> {
    if !exponent.is_positive() {
        return Err(CertifyError::NonPositiveExponent(exponent.clone()));
    }
    if c.lo() < &Dyadic::one() {
        return Err(CertifyError::BaseIntervalBelowOne);
    }
    let prec = working_precision(bits, exponent);
    let p = exponent.numer().to_biguint().expect("positive numerator");
    let q = exponent.denom().to_biguint().expect("positive denominator");
    let x = c.powu(&p, prec);

    let result = if q.is_one() {
        x
    } else if let Some(root) = newton_root_interval(&x, &q, prec) {
        root
    } else {
        let q_small: u64 = q.iter_u64_digits().next().unwrap_or(0);
        let q_small = if q.bits() <= 64 { q_small } else { u64::MAX };
        let upper_bracket = root_upper_bracket(x.hi(), q_small);
        let tight = |lo: &Dyadic, hi: &Dyadic| {
            let gap = hi - lo;
            // gap <= 2^-prec * hi
            (&gap * &Dyadic::new(BigInt::one() << prec, 0)) <= *hi
        };
        // Largest certified m with m^q <= x.lo.
        let (mut a, mut b) = (Dyadic::one(), upper_bracket.clone());
        while !tight(&a, &b) {
            let mid = (&(&a + &b) * &Dyadic::new(BigInt::one(), -1)).round(prec + 2, Round::Down);
            if mid <= a || mid >= b {
                break;
            }
            if mid.pow_round(&q, prec, Round::Up) <= *x.lo() {
                a = mid;
            } else {
                b = mid;
            }
        }
        let lower = a;
        // Smallest certified m with m^q >= x.hi.
        let (mut a, mut b) = (Dyadic::one(), upper_bracket);
        while !tight(&a, &b) {
            let mid = (&(&a + &b) * &Dyadic::new(BigInt::one(), -1)).round(prec + 2, Round::Up);
            if mid <= a || mid >= b {
                break;
            }
            if mid.pow_round(&q, prec, Round::Down) >= *x.hi() {
                b = mid;
            } else {
                a = mid;
            }
        }
        DyadicInterval::new(lower, b)
    };
    let result = result.round(prec);
    let limit = &result.hi().round(64, Round::Up) * &Dyadic::new(BigInt::one(), -(bits as i64));
    if result.width() > limit {
        return Err(CertifyError::PrecisionExhausted { term: String::new(), bits });
    }
    Ok(result)
}

fn exact_dot(w: &[BigRational], v: &[i64]) -> BigRational {
    w.iter().zip(v).fold(BigRational::zero(), |acc, (wk, &vk)| {
        acc + wk * BigRational::from_integer(vk.into())
    })
}

/// Hex SHA-256 of the canonical form of a recurrence.
pub fn spec_digest(spec: &ValidatedSpec) -> String {
    let digest = Sha256::digest(spec.canonical_text().as_bytes());
    format!("{digest:x}")
}

/// Checks a rational candidate `(w, c)` at the given precision.
pub fn certify_upper(spec: &ValidatedSpec, w: &[BigRational], c: &BigRational, bits: u32) -> Result<CertifiedBound, CertifyError> {
    if w.len() != spec.dimension() {
        return Err(CertifyError::DimensionMismatch {
            expected: spec.dimension(),
            found: w.len(),
        });
    }
    if c < &BigRational::one() {
        return Err(CertifyError::BaseBelowOne(c.clone()));
    }
    let wt = exact_dot(w, spec.target());
    if wt > BigRational::one() {
        return Err(CertifyError::TargetWeightAboveOne(wt));
    }
    let mut exponents = Vec::new();
    for term in spec.terms() {
        let mut row = Vec::with_capacity(term.summands.len());
        for s in &term.summands {
            let a = exact_dot(w, s);
            if !a.is_positive() {
                return Err(CertifyError::NonPositiveWeight {
                    term: term.name.clone(),
                    delta: s.clone(),
                    weight: a,
                });
            }
            row.push(a);
        }
        exponents.push(row);
    }

    let base_prec = bits as u64 + 32;
    let c_iv = DyadicInterval::from_rational(c, base_prec + c.numer().bits());
    let one = DyadicInterval::from_int(1);
    let mut per_term_residual = Vec::new();
    for (term, row) in spec.terms().iter().zip(&exponents) {
        let mut total = DyadicInterval::from_int(0);
        for a in row {
            let power = interval_pow(&c_iv, a, bits).map_err(|e| match e {
                CertifyError::PrecisionExhausted { bits, .. } => CertifyError::PrecisionExhausted {
                    term: term.name.clone(),
                    bits,
                },
                other => other,
            })?;
            let inv = power.recip(base_prec).expect("power of a base >= 1 is positive");
            total = total.add(&inv, base_prec);
        }
        let residual = one.sub(&total, base_prec);
        if residual.lo().is_negative() {
            return Err(if residual.hi().is_negative() {
                CertifyError::Rejected {
                    term: term.name.clone(),
                    residual,
                }
            } else {
                CertifyError::PrecisionExhausted {
                    term: term.name.clone(),
                    bits,
                }
            });
        }
        per_term_residual.push((term.name.clone(), residual));
    }
    Ok(CertifiedBound {
        w: w.to_vec(),
        c: c.clone(),
        precision_bits: bits,
        per_term_residual,
    })
}

/// [`certify_upper`], doubling the precision on an undecided sign up to
/// [`MAX_BITS`].
pub fn certify_with_retry(spec: &ValidatedSpec, w: &[BigRational], c: &BigRational, bits: u32) -> Result<CertifiedBound, CertifyError> {
    let mut bits = bits.max(1);
    loop {
        match certify_upper(spec, w, c, bits) {
            Err(CertifyError::PrecisionExhausted { .. }) if bits < MAX_BITS => bits = (bits * 2).min(MAX_BITS),
            other => return other,
        }
    }
}

fn ceil_to_frac_bits(r: &BigRational, frac_bits: u32) -> BigRational {
    let scale = BigRational::from_integer(BigInt::one() << frac_bits);
    (r * &scale).ceil() / scale
}

/// Rational candidate from a floating-point report: `w` rounded to
/// `2^-32` (then pulled back onto `w . t <= 1` along the largest target
/// coordinate if needed) and `c * (1 + slack)` rounded up to `2^-40`.
pub fn round_solution(spec: &ValidatedSpec, report: &AnalysisReport, slack: f64) -> Result<(Vec<BigRational>, BigRational), CertifyError> {
    if matches!(report.status, SolveStatus::Infeasible | SolveStatus::Unbounded) || !report.c.is_finite() {
        return Err(CertifyError::NoSolution(report.status));
    }
    let t = spec.target();
    let scale = BigRational::from_integer(BigInt::one() << WEIGHT_FRAC_BITS);
    let mut w: Vec<BigRational> = report
        .w
        .iter()
        .map(|&x| {
            let r = BigRational::from_f64(x).unwrap_or_else(BigRational::zero);
            (r * &scale).round() / &scale
        })
        .collect();
    let excess = exact_dot(&w, t) - BigRational::one();
    if excess.is_positive() {
        let k = (0..t.len()).max_by_key(|&k| t[k].unsigned_abs()).expect("non-empty target");
        w[k] -= excess / BigRational::from_integer(t[k].into());
    }

    let c = BigRational::from_f64(report.c).expect("finite growth base");
    let factor = BigRational::one() + BigRational::from_f64(slack.max(0.0)).unwrap_or_else(BigRational::zero);
    let mut c = ceil_to_frac_bits(&(c * factor), BASE_FRAC_BITS);
    if c < BigRational::one() {
        c = BigRational::one();
    }
    Ok((w, c))
}

/// Convenience for exponents `p/q` given as machine integers.
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

/// `p^n` as an exact rational, used by tests comparing against enclosures.
pub fn rational_pow(base: &BigRational, n: u32) -> BigRational {
    let num: BigInt = num_traits::pow(base.numer().clone(), n as usize);
    let den: BigInt = num_traits::pow(base.denom().clone(), n as usize);
    BigRational::new(num, den)
}

#[allow(dead_code)]
fn biguint(v: u64) -> BigUint {
    BigUint::from(v)
}
