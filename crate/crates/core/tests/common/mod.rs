//! Random recurrences and the solver invariants checked on them.
#![allow(dead_code)]

use proptest::collection::vec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use recbound::descent::{feasible_start, project_perp, solve_observed, term_gradient, SolveStatus, SolverConfig};
use recbound::model::{validate, DeltaVector, RecurrenceSpec, Term, ValidatedSpec, WeightVector};
use recbound::scalar::{RootFinder, TermRoot};

pub const TARGET_TOL: f64 = 1e-9;

fn delta(d: usize) -> impl Strategy<Value = Vec<i64>> {
    vec(prop_oneof![16 => 0i64..=3, 1 => Just(-1i64)], d).prop_filter("nonzero", |v| v.iter().any(|&x| x != 0))
}

/// Recurrences with `d <= 4`, at most 8 terms and at most 5 summands per term.
pub fn spec_strategy() -> impl Strategy<Value = ValidatedSpec> {
    (1usize..=4)
        .prop_flat_map(|d| {
            let target = vec(prop_oneof![3 => 1i64..=3, 1 => Just(0i64)], d).prop_filter("nonzero target", |t| t.iter().any(|&x| x != 0));
            let terms = vec(vec(delta(d), 1..=5), 1..=8);
            (Just(d), target, terms)
        })
        .prop_map(|(d, target, terms)| {
            let terms = terms
                .into_iter()
                .enumerate()
                .map(|(i, s)| Term::new(format!("t{i}"), s.into_iter().map(DeltaVector::from).collect()))
                .collect();
            validate(RecurrenceSpec::new("random", d, target, terms)).expect("generated spec is valid")
        })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn as_f64(v: &[i64]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// A point of the hyperplane near `base`, moved by up to `radius * |base|`
/// inside it.
fn nearby(base: &WeightVector, t: &[i64], radius: f64, rng: &mut ChaCha8Rng) -> WeightVector {
    let noise: Vec<f64> = (0..base.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let noise = project_perp(&noise, t);
    let n = norm(&noise);
    let scale = if n > 0.0 {
        rng.gen_range(0.0..radius) * norm(base) / n
    } else {
        0.0
    };
    let mut w = WeightVector::new(base.iter().zip(&noise).map(|(b, e)| b + scale * e).collect());
    w.project_to_hyperplane(t);
    w
}

fn finite(root: &TermRoot) -> bool {
    root.is_finite() && root.converged
}

/// Every term root is quasiconvex in `w`.
pub fn check_quasiconvexity(spec: &ValidatedSpec, seed: u64) -> Result<(), String> {
    let Ok(start) = feasible_start(spec, seed) else {
        return Ok(());
    };
    let finder = RootFinder::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        let w1 = nearby(&start, spec.target(), 0.5, &mut rng);
        let w2 = nearby(&start, spec.target(), 0.5, &mut rng);
        let theta: f64 = rng.gen_range(0.0..=1.0);
        let mix = WeightVector::new(w1.iter().zip(w2.iter()).map(|(a, b)| theta * a + (1.0 - theta) * b).collect());
        for term in spec.terms() {
            let (Ok(r1), Ok(r2)) = (finder.term_root(term, &w1), finder.term_root(term, &w2)) else {
                continue;
            };
            if !finite(&r1) || !finite(&r2) {
                continue;
            }
            let rm = finder.term_root(term, &mix).map_err(|e| e.to_string())?;
            let bound = r1.value.max(r2.value);
            if rm.value > bound * (1.0 + 1e-10) + finder.tol {
                return Err(format!(
                    "term {} at theta {theta}: root {} above max({}, {})",
                    term.name, rm.value, r1.value, r2.value
                ));
            }
        }
    }
    Ok(())
}

/// Central-difference gradients of each multi-summand root point against
/// `D_i`. Returns the worst cosine seen.
pub fn check_gradient(spec: &ValidatedSpec, seed: u64) -> Result<f64, String> {
    let Ok(start) = feasible_start(spec, seed) else {
        return Ok(-1.0);
    };
    let finder = RootFinder::new(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let w = nearby(&start, spec.target(), 0.3, &mut rng);
    let h = 1e-6;
    let mut worst: f64 = -1.0;
    for term in spec.terms().iter().filter(|t| t.summands.len() >= 2) {
        let root = finder.term_root(term, &w).map_err(|e| e.to_string())?;
        if !finite(&root) || root.value > 1e6 {
            continue;
        }
        let mut grad = Vec::with_capacity(w.len());
        let mut usable = true;
        for k in 0..w.len() {
            let mut plus = w.clone();
            plus.0[k] += h;
            let mut minus = w.clone();
            minus.0[k] -= h;
            match (finder.term_root(term, &plus), finder.term_root(term, &minus)) {
                (Ok(a), Ok(b)) if finite(&a) && finite(&b) => grad.push((a.value - b.value) / (2.0 * h)),
                _ => usable = false,
            }
        }
        if !usable {
            continue;
        }
        let d = term_gradient(term, &w, root.value, spec.target()).direction;
        let (gn, dn) = (norm(&grad), norm(&d));
        if gn == 0.0 || dn == 0.0 {
            return Err(format!("term {}: zero gradient ({gn}) or normal ({dn})", term.name));
        }
        let cosine = dot(&grad, &d) / (gn * dn);
        worst = worst.max(cosine);
        if cosine > -1.0 + 1e-4 {
            return Err(format!("term {}: cosine {cosine} at w = {:?}", term.name, w.0));
        }
    }
    Ok(worst)
}

/// Facts about one solver run.
pub struct DescentCheck {
    pub status: SolveStatus,
    pub iterates: usize,
    pub max_hyperplane_error: f64,
    pub max_probability_error: f64,
}

/// Runs the solver and checks monotone `c`, iterates on the hyperplane,
/// `sum_j p_ij = 1` on basis terms, and the infeasibility witness.
pub fn check_descent(spec: &ValidatedSpec, seed: u64) -> Result<DescentCheck, String> {
    let config = SolverConfig {
        seed,
        ..SolverConfig::with_tol(TARGET_TOL)
    };
    let t = as_f64(spec.target());
    let mut cs: Vec<f64> = Vec::new();
    let mut max_hyperplane_error: f64 = 0.0;
    let report = solve_observed(spec, &config, |it| {
        cs.push(it.roots.c);
        max_hyperplane_error = max_hyperplane_error.max((dot(it.w, &t) - 1.0).abs());
    })
    .map_err(|e| e.to_string())?;

    if report.status == SolveStatus::Infeasible {
        let witness = report.witness.as_ref().ok_or("infeasible report without witness")?;
        if witness.alpha > 1e-9 || witness.max_margin > 1e-6 {
            return Err(format!("witness alpha {} margin {}", witness.alpha, witness.max_margin));
        }
        let mut combo = vec![0.0; spec.dimension()];
        let total: f64 = witness.entries.iter().map(|e| e.coefficient).sum();
        for e in &witness.entries {
            for (g, &x) in combo.iter_mut().zip(e.delta.iter()) {
                *g += e.coefficient * x as f64;
            }
        }
        let residual: Vec<f64> = combo.iter().zip(&t).map(|(g, tk)| g - witness.alpha * tk).collect();
        if (total - 1.0).abs() > 1e-9 || norm(&residual) > 1e-6 {
            return Err(format!("witness combination off: total {total}, residual {residual:?}"));
        }
        return Ok(DescentCheck {
            status: report.status,
            iterates: cs.len(),
            max_hyperplane_error,
            max_probability_error: 0.0,
        });
    }

    if report.status == SolveStatus::Unbounded {
        let v = recbound::descent::escape_direction(spec).ok_or("unbounded report without escape direction")?;
        if dot(&v, &t).abs() > 1e-9 * norm(&v) * norm(&t) {
            return Err("escape direction leaves the hyperplane".into());
        }
        // Along `v` no weight may shrink, and each multi-summand term keeps at
        // most one weight fixed, so every root tends to 1.
        for term in spec.terms() {
            let mut fixed = 0;
            for s in &term.summands {
                let growth = dot(&v, &as_f64(s));
                let unit = 1e-9 * norm(&v) * norm(&as_f64(s));
                if growth < -unit {
                    return Err(format!("escape direction shrinks the weight of {s}"));
                }
                if growth <= unit {
                    fixed += 1;
                }
            }
            if term.summands.len() >= 2 && fixed > 1 {
                return Err(format!("escape direction fixes {fixed} weights of term {}", term.name));
            }
        }
        if report.c != 1.0 || max_hyperplane_error > 1e-12 {
            return Err(format!("unbounded report with c = {}", report.c));
        }
        return Ok(DescentCheck {
            status: report.status,
            iterates: cs.len(),
            max_hyperplane_error,
            max_probability_error: 0.0,
        });
    }
    for pair in cs.windows(2) {
        if pair[1] > pair[0] {
            return Err(format!("c increased from {} to {}", pair[0], pair[1]));
        }
    }
    if max_hyperplane_error > 1e-12 {
        return Err(format!("iterate off the hyperplane by {max_hyperplane_error}"));
    }
    let mut max_probability_error: f64 = 0.0;
    for b in &report.basis {
        let term = spec.term(&b.name).expect("basis term exists");
        let total: f64 = term.summands.iter().map(|s| report.c.powf(-report.w.dot(s).unwrap())).sum();
        max_probability_error = max_probability_error.max((total - 1.0).abs());
    }
    if max_probability_error > 10.0 * TARGET_TOL {
        return Err(format!("basis probabilities off by {max_probability_error}"));
    }
    if report.basis.is_empty() {
        return Err("feasible report with empty basis".into());
    }
    Ok(DescentCheck {
        status: report.status,
        iterates: cs.len(),
        max_hyperplane_error,
        max_probability_error,
    })
}
