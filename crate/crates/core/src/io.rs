//! Recurrence files and report serialization.
//!
//! Input is a JSON object:
//!
//! ```text
//! { "name": "smallmis", "dimension": 2, "variables": ["n","k"], "target": [3,1],
//!   "terms": { "deg0": [[1,1]], "deg1": [[2,1],[2,1]],
//!              "deg2": [[3,1],[3,1],[3,1]], "deg3": [[4,1],[1,0]] } }
//! ```
//!
//! A multiplicity is written by repeating the summand. Unknown keys and
//! repeated term names are errors; `comments` may hold any JSON value.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use thiserror::Error;

use crate::descent::{AnalysisReport, BasisTerm, InfeasibilityWitness, SolveStatus, WitnessEntry};
use crate::model::{validate, DeltaVector, ModelError, RecurrenceSpec, Term, ValidatedSpec, WeightVector};
use crate::scalar::TermRoot;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    SyntaxError { line: usize, column: usize, message: String },
    #[error("invalid recurrence: {0}")]
    SemanticError(#[from] ModelError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecurrenceFile {
    name: String,
    dimension: usize,
    variables: Vec<String>,
    target: Vec<i64>,
    terms: TermMap,
    #[serde(default)]
    #[allow(dead_code)]
    comments: Option<serde_json::Value>,
}

/// Term map in file order, with repeated keys rejected.
#[derive(Debug)]
struct TermMap(Vec<(String, Vec<Vec<i64>>)>);

impl<'de> Deserialize<'de> for TermMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct TermVisitor;

        impl<'de> Visitor<'de> for TermVisitor {
            type Value = TermMap;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object mapping term names to lists of integer vectors")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<TermMap, A::Error> {
                let mut entries: Vec<(String, Vec<Vec<i64>>)> = Vec::new();
                while let Some(name) = map.next_key::<String>()? {
                    if entries.iter().any(|(n, _)| *n == name) {
                        return Err(de::Error::custom(format!("duplicate term name `{name}`")));
                    }
                    let summands = map.next_value()?;
                    entries.push((name, summands));
                }
                Ok(TermMap(entries))
            }
        }

        deserializer.deserialize_map(TermVisitor)
    }
}

/// Parses and validates a recurrence file.
pub fn parse(text: &str) -> Result<ValidatedSpec, ParseError> {
    let file: RecurrenceFile = serde_json::from_str(text).map_err(|e| ParseError::SyntaxError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let terms = file
        .terms
        .0
        .into_iter()
        .map(|(name, summands)| Term::new(name, summands.into_iter().map(DeltaVector::from).collect()))
        .collect();
    let spec = RecurrenceSpec {
        name: file.name,
        dimension: file.dimension,
        variable_names: file.variables,
        terms,
        target: file.target,
    };
    Ok(validate(spec)?)
}

/// JSON text for a spec, accepted by [`parse`].
pub fn to_file_text(spec: &RecurrenceSpec) -> String {
    let mut terms = serde_json::Map::new();
    for term in &spec.terms {
        let rows: Vec<serde_json::Value> = term.summands.iter().map(|s| serde_json::json!(s.0)).collect();
        terms.insert(term.name.clone(), serde_json::Value::Array(rows));
    }
    let doc = serde_json::json!({
        "name": spec.name,
        "dimension": spec.dimension,
        "variables": spec.variable_names,
        "target": spec.target,
        "terms": terms,
    });
    serde_json::to_string_pretty(&doc).expect("JSON values serialize")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Machine,
}

/// Renders a report for people (`Text`) or for [`parse_machine_report`].
pub fn emit_report(spec: &ValidatedSpec, report: &AnalysisReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => emit_text(spec, report),
        ReportFormat::Machine => emit_machine(report),
    }
}

fn fmt_vec(v: &[f64], digits: usize) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|x| {
            let s = format!("{x:.digits$}");
            match s.strip_prefix('-') {
                Some(rest) if rest.chars().all(|ch| ch == '0' || ch == '.') => rest.to_string(),
                _ => s,
            }
        })
        .collect();
    format!("({})", parts.join(", "))
}

fn emit_text(spec: &ValidatedSpec, report: &AnalysisReport) -> String {
    let mut out = String::new();
    let target = DeltaVector(spec.target().to_vec());
    let _ = writeln!(out, "recurrence {} (d = {}, t = {target})", spec.name, spec.dimension());
    let _ = writeln!(out, "status = {}", report.status.as_str());
    if report.status == SolveStatus::Infeasible {
        let _ = writeln!(out, "c = inf");
        let _ = writeln!(out, "no weight vector makes every summand weight positive");
        if let Some(witness) = &report.witness {
            let _ = writeln!(out, "\ninfeasibility witness");
            let _ = writeln!(
                out,
                "  combination = {:.6} * t (best margin {:.3e})",
                witness.alpha, witness.max_margin
            );
            for e in &witness.entries {
                let _ = writeln!(out, "  {:.6} x {} summand {}", e.coefficient, e.term, e.delta);
            }
        }
        return out;
    }
    let _ = writeln!(out, "c = {:.6}", report.c);
    if report.status == SolveStatus::Unbounded {
        let _ = writeln!(out, "every root tends to 1 along a direction inside w . t = 1");
        let _ = writeln!(out, "c = 1 is approached but not attained: F(n*t) grows subexponentially");
    } else {
        let _ = writeln!(out, "F(n*t) = O({:.6}^n)", report.c);
    }
    let _ = writeln!(out, "w = {}", fmt_vec(&report.w, 9));
    let _ = writeln!(out, "iterations = {} (rounds {})", report.iterations, report.outer_rounds);
    let _ = writeln!(out, "\nterms by root");
    let mut rows: Vec<(&String, &TermRoot)> = report.per_term.iter().collect();
    rows.sort_by(|a, b| b.1.value.total_cmp(&a.1.value).then_with(|| a.0.cmp(b.0)));
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    for (name, root) in rows {
        let flag = match report.basis_coefficient(name) {
            Some(b) => format!("  basis b = {b:.6}"),
            None => String::new(),
        };
        let _ = writeln!(out, "  {name:<width$}  {:>14.9}{flag}", root.value);
    }
    out
}

fn emit_machine(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "status = {}", report.status.as_str());
    let _ = writeln!(out, "c = {:?}", report.c);
    let _ = writeln!(out, "dimension = {}", report.w.len());
    for (k, wk) in report.w.iter().enumerate() {
        let _ = writeln!(out, "w[{k}] = {wk:?}");
    }
    let _ = writeln!(out, "iterations = {}", report.iterations);
    let _ = writeln!(out, "outer_rounds = {}", report.outer_rounds);
    let _ = writeln!(out, "certificate_norm = {:?}", report.certificate_norm);
    for (name, root) in &report.per_term {
        let exps: Vec<String> = root.exponents.iter().map(|e| format!("{e:?}")).collect();
        let _ = writeln!(out, "term.{name}.root = {:?}", root.value);
        let _ = writeln!(out, "term.{name}.converged = {}", root.converged);
        let _ = writeln!(out, "term.{name}.residual = {:?}", root.residual);
        let _ = writeln!(out, "term.{name}.exponents = {}", exps.join(","));
        let _ = writeln!(out, "term.{name}.basis = {}", report.is_basis(name));
        if let Some(b) = report.basis_coefficient(name) {
            let _ = writeln!(out, "term.{name}.b = {b:?}");
        }
    }
    if let Some(w) = &report.witness {
        let _ = writeln!(out, "witness.alpha = {:?}", w.alpha);
        let _ = writeln!(out, "witness.max_margin = {:?}", w.max_margin);
        let _ = writeln!(out, "witness.entries = {}", w.entries.len());
        for (k, e) in w.entries.iter().enumerate() {
            let _ = writeln!(out, "witness.entry[{k}].term = {}", e.term);
            let _ = writeln!(out, "witness.entry[{k}].summand = {}", e.summand);
            let _ = writeln!(out, "witness.entry[{k}].delta = {}", e.delta);
            let _ = writeln!(out, "witness.entry[{k}].coefficient = {:?}", e.coefficient);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportParseError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("line {line}: bad value for `{key}`")]
    BadValue { line: usize, key: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("missing key `{0}`")]
    Missing(String),
}

fn parse_delta(s: &str) -> Option<DeltaVector> {
    let inner = s.strip_prefix('(')?.strip_suffix(')')?;
    inner
        .split(',')
        .map(|p| p.trim().parse::<i64>().ok())
        .collect::<Option<Vec<_>>>()
        .map(DeltaVector)
}

#[derive(Default)]
struct PartialTerm {
    root: Option<f64>,
    converged: Option<bool>,
    residual: Option<f64>,
    exponents: Option<Vec<f64>>,
    basis: Option<bool>,
    b: Option<f64>,
}

#[derive(Default, Clone)]
struct PartialEntry {
    term: Option<String>,
    summand: Option<usize>,
    delta: Option<DeltaVector>,
    coefficient: Option<f64>,
}

/// Reads the machine format back into a report.
pub fn parse_machine_report(text: &str) -> Result<AnalysisReport, ReportParseError> {
    let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let (k, v) = raw.split_once(" = ").ok_or(ReportParseError::Malformed { line: idx + 1 })?;
        kv.insert(k.trim().to_string(), (idx + 1, v.trim().to_string()));
    }
    let bad = |line: usize, key: &str| ReportParseError::BadValue {
        line,
        key: key.to_string(),
    };
    let take = |key: &str| kv.get(key).ok_or_else(|| ReportParseError::Missing(key.to_string()));
    let num = |key: &str| -> Result<f64, ReportParseError> {
        let (line, v) = take(key)?;
        v.parse().map_err(|_| bad(*line, key))
    };
    let int = |key: &str| -> Result<usize, ReportParseError> {
        let (line, v) = take(key)?;
        v.parse().map_err(|_| bad(*line, key))
    };

    let (line, status) = take("status")?;
    let status = SolveStatus::parse(status).ok_or_else(|| bad(*line, "status"))?;
    let dimension = int("dimension")?;
    let w = (0..dimension).map(|k| num(&format!("w[{k}]"))).collect::<Result<Vec<_>, _>>()?;

    let mut terms: BTreeMap<String, PartialTerm> = BTreeMap::new();
    let mut entries: BTreeMap<usize, PartialEntry> = BTreeMap::new();
    for (key, (line, value)) in &kv {
        let line = *line;
        if let Some(rest) = key.strip_prefix("term.") {
            let (name, field) = rest.rsplit_once('.').ok_or_else(|| bad(line, key))?;
            let t = terms.entry(name.to_string()).or_default();
            match field {
                "root" => t.root = Some(value.parse().map_err(|_| bad(line, key))?),
                "converged" => t.converged = Some(value.parse().map_err(|_| bad(line, key))?),
                "residual" => t.residual = Some(value.parse().map_err(|_| bad(line, key))?),
                "basis" => t.basis = Some(value.parse().map_err(|_| bad(line, key))?),
                "b" => t.b = Some(value.parse().map_err(|_| bad(line, key))?),
                "exponents" => {
                    let exps = if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|p| p.trim().parse::<f64>())
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|_| bad(line, key))?
                    };
                    t.exponents = Some(exps);
                }
                _ => return Err(ReportParseError::UnknownKey { line, key: key.clone() }),
            }
        } else if let Some(rest) = key.strip_prefix("witness.entry[") {
            let (index, field) = rest.split_once("].").ok_or_else(|| bad(line, key))?;
            let index: usize = index.parse().map_err(|_| bad(line, key))?;
            let e = entries.entry(index).or_default();
            match field {
                "term" => e.term = Some(value.clone()),
                "summand" => e.summand = Some(value.parse().map_err(|_| bad(line, key))?),
                "delta" => e.delta = Some(parse_delta(value).ok_or_else(|| bad(line, key))?),
                "coefficient" => e.coefficient = Some(value.parse().map_err(|_| bad(line, key))?),
                _ => return Err(ReportParseError::UnknownKey { line, key: key.clone() }),
            }
        } else if !matches!(
            key.as_str(),
            "status"
                | "c"
                | "dimension"
                | "iterations"
                | "outer_rounds"
                | "certificate_norm"
                | "witness.alpha"
                | "witness.max_margin"
                | "witness.entries"
        ) && !(key.starts_with("w[") && key.ends_with(']'))
        {
            return Err(ReportParseError::UnknownKey { line, key: key.clone() });
        }
    }

    let mut per_term = BTreeMap::new();
    let mut basis = Vec::new();
    for (name, t) in terms {
        let missing = |f: &str| ReportParseError::Missing(format!("term.{name}.{f}"));
        let root = TermRoot {
            value: t.root.ok_or_else(|| missing("root"))?,
            exponents: t.exponents.ok_or_else(|| missing("exponents"))?,
            converged: t.converged.ok_or_else(|| missing("converged"))?,
            residual: t.residual.ok_or_else(|| missing("residual"))?,
        };
        if t.basis.ok_or_else(|| missing("basis"))? {
            basis.push(BasisTerm {
                name: name.clone(),
                b: t.b.ok_or_else(|| missing("b"))?,
            });
        }
        per_term.insert(name, root);
    }

    let witness = if kv.contains_key("witness.alpha") {
        let count = int("witness.entries")?;
        let mut list = Vec::with_capacity(count);
        for k in 0..count {
            let e = entries.get(&k).cloned().unwrap_or_default();
            let missing = |f: &str| ReportParseError::Missing(format!("witness.entry[{k}].{f}"));
            list.push(WitnessEntry {
                term: e.term.ok_or_else(|| missing("term"))?,
                summand: e.summand.ok_or_else(|| missing("summand"))?,
                delta: e.delta.ok_or_else(|| missing("delta"))?,
                coefficient: e.coefficient.ok_or_else(|| missing("coefficient"))?,
            });
        }
        Some(InfeasibilityWitness {
            entries: list,
            alpha: num("witness.alpha")?,
            max_margin: num("witness.max_margin")?,
        })
    } else {
        None
    };

    Ok(AnalysisReport {
        c: num("c")?,
        w: WeightVector::new(w),
        per_term,
        basis,
        iterations: int("iterations")?,
        outer_rounds: int("outer_rounds")?,
        status,
        certificate_norm: num("certificate_norm")?,
        witness,
    })
}
