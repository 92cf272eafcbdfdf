//! Plain-text certificate records.
//!
//! ```text
//! recbound-certificate 1
//! spec = smallmis
//! spec_sha256 = <hex>
//! bits = 64
//! w[0] = 1/3
//! c = 3/1
//! term.deg0.residual.lo = 1*2^-1
//! term.deg0.residual.hi = 1*2^-1
//! ```

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use thiserror::Error;

use super::dyadic::{Dyadic, DyadicInterval};
use super::{certify_with_retry, spec_digest, CertifiedBound, CertifyError};
use crate::model::ValidatedSpec;

const FORMAT_LINE: &str = "recbound-certificate 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub spec_name: String,
    pub spec_sha256: String,
    pub bound: CertifiedBound,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateParseError {
    #[error("missing format line `{FORMAT_LINE}`")]
    BadHeader,
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("line {line}: bad value for `{key}`")]
    BadValue { line: usize, key: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("missing key `{0}`")]
    Missing(String),
}

impl Certificate {
    pub fn new(spec: &ValidatedSpec, bound: CertifiedBound) -> Self {
        Certificate {
            spec_name: spec.name.clone(),
            spec_sha256: spec_digest(spec),
            bound,
        }
    }

    /// Re-runs the check for `spec`. The precision may be raised if the
    /// recorded one no longer decides every sign.
    pub fn reverify(&self, spec: &ValidatedSpec) -> Result<CertifiedBound, CertifyError> {
        if spec_digest(spec) != self.spec_sha256 {
            return Err(CertifyError::SpecMismatch);
        }
        certify_with_retry(spec, &self.bound.w, &self.bound.c, self.bound.precision_bits)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{FORMAT_LINE}")?;
        writeln!(f, "spec = {}", self.spec_name)?;
        writeln!(f, "spec_sha256 = {}", self.spec_sha256)?;
        writeln!(f, "bits = {}", self.bound.precision_bits)?;
        for (k, wk) in self.bound.w.iter().enumerate() {
            writeln!(f, "w[{k}] = {}/{}", wk.numer(), wk.denom())?;
        }
        writeln!(f, "c = {}/{}", self.bound.c.numer(), self.bound.c.denom())?;
        for (name, r) in &self.bound.per_term_residual {
            writeln!(f, "term.{name}.residual.lo = {}", r.lo())?;
            writeln!(f, "term.{name}.residual.hi = {}", r.hi())?;
        }
        Ok(())
    }
}

fn parse_rational(s: &str) -> Option<BigRational> {
    BigRational::from_str(s.trim()).ok()
}

/// Parses the text produced by `Display for Certificate`.
pub fn parse_certificate(text: &str) -> Result<Certificate, CertificateParseError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == FORMAT_LINE => {}
        _ => return Err(CertificateParseError::BadHeader),
    }
    let mut spec_name = None;
    let mut digest = None;
    let mut bits = None;
    let mut w: Vec<Option<BigRational>> = Vec::new();
    let mut c = None;
    let mut residuals: Vec<(String, Option<Dyadic>, Option<Dyadic>)> = Vec::new();

    for (idx, raw) in lines {
        let line = idx + 1;
        let (key, value) = raw.split_once('=').ok_or(CertificateParseError::Malformed { line })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = || CertificateParseError::BadValue {
            line,
            key: key.to_string(),
        };
        if key == "spec" {
            spec_name = Some(value.to_string());
        } else if key == "spec_sha256" {
            digest = Some(value.to_string());
        } else if key == "bits" {
            bits = Some(value.parse::<u32>().map_err(|_| bad())?);
        } else if key == "c" {
            c = Some(parse_rational(value).ok_or_else(bad)?);
        } else if let Some(index) = key.strip_prefix("w[").and_then(|k| k.strip_suffix(']')) {
            let k: usize = index.parse().map_err(|_| bad())?;
            if k >= w.len() {
                w.resize(k + 1, None);
            }
            w[k] = Some(parse_rational(value).ok_or_else(bad)?);
        } else if let Some(rest) = key.strip_prefix("term.") {
            let (name, side) = if let Some(n) = rest.strip_suffix(".residual.lo") {
                (n, 0)
            } else if let Some(n) = rest.strip_suffix(".residual.hi") {
                (n, 1)
            } else {
                return Err(CertificateParseError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            };
            let d: Dyadic = value.parse().map_err(|_| bad())?;
            let pos = match residuals.iter().position(|(n, _, _)| n == name) {
                Some(p) => p,
                None => {
                    residuals.push((name.to_string(), None, None));
                    residuals.len() - 1
                }
            };
            if side == 0 {
                residuals[pos].1 = Some(d);
            } else {
                residuals[pos].2 = Some(d);
            }
        } else {
            return Err(CertificateParseError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
    }

    let missing = |k: &str| CertificateParseError::Missing(k.to_string());
    let w = w
        .into_iter()
        .enumerate()
        .map(|(k, v)| v.ok_or_else(|| missing(&format!("w[{k}]"))))
        .collect::<Result<Vec<_>, _>>()?;
    if w.is_empty() {
        return Err(missing("w[0]"));
    }
    let per_term_residual = residuals
        .into_iter()
        .map(|(name, lo, hi)| match (lo, hi) {
            (Some(lo), Some(hi)) if lo <= hi => Ok((name, DyadicInterval::new(lo, hi))),
            (Some(_), Some(_)) => Err(missing(&format!("term.{name}.residual (lo > hi)"))),
            _ => Err(missing(&format!("term.{name}.residual"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Certificate {
        spec_name: spec_name.ok_or_else(|| missing("spec"))?,
        spec_sha256: digest.ok_or_else(|| missing("spec_sha256"))?,
        bound: CertifiedBound {
            w,
            c: c.ok_or_else(|| missing("c"))?,
            precision_bits: bits.ok_or_else(|| missing("bits"))?,
            per_term_residual,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certify_upper, ratio};
    use crate::model::{small_mis, validate};

    #[test]
    fn round_trip_and_reverify() {
        let spec = validate(small_mis(vec![3, 1])).unwrap();
        let bound = certify_upper(&spec, &[ratio(1, 3), ratio(0, 1)], &ratio(3001, 1000), 64).unwrap();
        let cert = Certificate::new(&spec, bound);
        let text = cert.to_string();
        let parsed = parse_certificate(&text).unwrap();
        assert_eq!(parsed, cert);
        assert!(parsed.reverify(&spec).is_ok());

        let other = validate(small_mis(vec![4, 1])).unwrap();
        assert_eq!(parsed.reverify(&other), Err(CertifyError::SpecMismatch));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_certificate("nope"), Err(CertificateParseError::BadHeader));
        let text = format!("{FORMAT_LINE}\nspec = x\nbogus\n");
        assert!(matches!(
            parse_certificate(&text),
            Err(CertificateParseError::Malformed { line: 3 })
        ));
        let text = format!("{FORMAT_LINE}\nspec = x\nspec_sha256 = ab\nbits = 64\nc = 2/1\n");
        assert_eq!(parse_certificate(&text), Err(CertificateParseError::Missing("w[0]".into())));
    }
}
