//! Initial weight vector: maximize the smallest summand weight `w . delta`
//! over the hyperplane `w . t = 1`.
//!
//! The margin `min_delta w . delta` is a minimum of linear functions, so the
//! same active-set / min-norm-direction loop used for the main descent
//! applies, with each summand's own `delta` as its ascent normal. Line
//! maximization along a direction is exact because the margin is piecewise
//! linear.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::min_norm::{dot, min_norm_point, norm};
use super::project_perp;
use crate::model::{DeltaVector, ValidatedSpec, WeightVector};

/// Proof that no weight vector makes every summand weight positive: a convex
/// combination of summands equal to `alpha * t` with `alpha <= 0`, up to
/// rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityWitness {
    pub entries: Vec<WitnessEntry>,
    /// Multiple of `t` reached by the combination.
    pub alpha: f64,
    /// Largest summand margin achievable on the hyperplane.
    pub max_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessEntry {
    pub term: String,
    pub summand: usize,
    pub delta: DeltaVector,
    pub coefficient: f64,
}

struct Candidate {
    term: usize,
    summand: usize,
    delta: Vec<f64>,
    projected: Vec<f64>,
}

fn margins(w: &[f64], cands: &[Candidate]) -> Vec<f64> {
    cands.iter().map(|c| dot(w, &c.delta)).collect()
}

/// Largest `f(eps) = min_k (a_k + eps b_k)` over `eps >= 0`; returns the
/// smallest maximizing `eps`, or `None` if `f` grows without bound.
fn maximize_min_linear(a: &[f64], b: &[f64]) -> Option<f64> {
    if b.iter().all(|&bk| bk > 0.0) {
        return None;
    }
    let f = |eps: f64| a.iter().zip(b).map(|(ak, bk)| ak + eps * bk).fold(f64::INFINITY, f64::min);
    let mut best_eps = 0.0;
    let mut best = f(0.0);
    for k in 0..a.len() {
        for l in 0..a.len() {
            let denom = b[k] - b[l];
            if denom <= 0.0 {
                continue;
            }
            let eps = (a[l] - a[k]) / denom;
            if eps > 0.0 && eps.is_finite() {
                let val = f(eps);
                if val > best || (val == best && eps < best_eps) {
                    best = val;
                    best_eps = eps;
                }
            }
        }
    }
    Some(best_eps)
}

/// A direction `v` perpendicular to `t` along which every root tends to 1, if
/// one exists. Then `c = 1` is the infimum of `c_w` and no finite `w` attains
/// it.
///
/// Along `v` a summand weight grows when `v . delta > 0` and stays fixed when
/// `v . delta = 0`; a multi-summand root tends to 1 when at most one of its
/// weights stays fixed. `v` is taken from the relative interior of the cone
/// `{v : v . t = 0, v . delta >= 0}`, which has the fewest fixed weights.
/// Summands forced to zero on the cone are found as supports of vanishing
/// min-norm points and projected out until the min-norm point is nonzero.
pub fn escape_direction(spec: &ValidatedSpec) -> Option<Vec<f64>> {
    let t = spec.target();
    let mut owner: Vec<usize> = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut fixed = vec![0usize; spec.terms().len()];
    let mut scale: f64 = 0.0;
    for (i, term) in spec.terms().iter().enumerate() {
        for s in &term.summands {
            let delta: Vec<f64> = s.iter().map(|&x| x as f64).collect();
            scale = scale.max(norm(&delta));
            owner.push(i);
            vectors.push(project_perp(&delta, t));
        }
    }
    let mut live: Vec<usize> = (0..vectors.len()).collect();
    // Orthonormal basis of the directions already forced to zero.
    let mut frozen: Vec<Vec<f64>> = Vec::new();
    let v = loop {
        let mut next_live = Vec::with_capacity(live.len());
        for &k in &live {
            let mut p = vectors[k].clone();
            for q in &frozen {
                let s = dot(&p, q);
                p.iter_mut().zip(q).for_each(|(a, b)| *a -= s * b);
            }
            if norm(&p) <= 1e-10 * scale {
                fixed[owner[k]] += 1;
            } else {
                vectors[k] = p;
                next_live.push(k);
            }
        }
        live = next_live;
        if live.is_empty() {
            return None;
        }
        let points: Vec<Vec<f64>> = live.iter().map(|&k| vectors[k].clone()).collect();
        let mn = min_norm_point(&points).ok()?;
        if mn.norm() > 1e-9 * scale {
            break mn.point;
        }
        let mut removed = Vec::new();
        for (&k, &coef) in live.iter().zip(&mn.coefficients) {
            if coef > 1e-9 {
                removed.push(k);
            }
        }
        if removed.is_empty() {
            return None;
        }
        for &k in &removed {
            let mut q = vectors[k].clone();
            for f in &frozen {
                let s = dot(&q, f);
                q.iter_mut().zip(f).for_each(|(a, b)| *a -= s * b);
            }
            let n = norm(&q);
            if n > 1e-10 * scale {
                q.iter_mut().for_each(|a| *a /= n);
                frozen.push(q);
            }
        }
    };
    let ok = spec.terms().iter().zip(&fixed).all(|(term, &f)| term.summands.len() == 1 || f <= 1);
    ok.then_some(v)
}

/// A weight vector on `w . t = 1` with every `w . delta > 0`.
///
/// `seed` perturbs the starting point inside the hyperplane, which only
/// matters when the set of margin maximizers is not a single point.
pub fn feasible_start(spec: &ValidatedSpec, seed: u64) -> Result<WeightVector, InfeasibilityWitness> {
    let d = spec.dimension();
    let t = spec.target();
    let tf: Vec<f64> = t.iter().map(|&x| x as f64).collect();
    let tt = dot(&tf, &tf);

    let mut cands: Vec<Candidate> = Vec::new();
    for (i, term) in spec.terms().iter().enumerate() {
        for (j, s) in term.summands.iter().enumerate() {
            let delta: Vec<f64> = s.iter().map(|&x| x as f64).collect();
            if cands.iter().any(|c| c.delta == delta) {
                continue;
            }
            let projected = project_perp(&delta, t);
            cands.push(Candidate {
                term: i,
                summand: j,
                delta,
                projected,
            });
        }
    }
    let scale = cands.iter().map(|c| norm(&c.delta)).fold(0.0, f64::max) / tt.sqrt();

    let mut w: Vec<f64> = tf.iter().map(|x| x / tt).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let noise = project_perp(&noise, t);
    let noise_norm = norm(&noise);
    if noise_norm > 0.0 {
        for (wk, nk) in w.iter_mut().zip(&noise) {
            *wk += 1e-3 * nk / (noise_norm * tt.sqrt());
        }
    }

    let all_proj: Vec<Vec<f64>> = cands.iter().map(|c| c.projected.clone()).collect();
    let max_proj = all_proj.iter().map(|p| norm(p)).fold(0.0, f64::max);
    let global = min_norm_point(&all_proj).expect("at least one summand");
    if global.norm() > 1e-9 * max_proj.max(1e-300) {
        // Some direction inside the hyperplane increases every margin; walk
        // along it until each margin reaches a fixed fraction of its scale.
        let v = &global.point;
        let mut s: f64 = 0.0;
        for c in &cands {
            let goal = norm(&c.delta) / tt.sqrt();
            let gain = dot(v, &c.delta);
            s = s.max((goal - dot(&w, &c.delta)) / gain);
        }
        for (wk, vk) in w.iter_mut().zip(v) {
            *wk += s * vk;
        }
        let mut w = WeightVector::new(w);
        w.project_to_hyperplane(t);
        return Ok(w);
    }

    let mut tol = 0.1 * scale;
    let mut last_active: Vec<usize> = Vec::new();
    let mut last_coeffs: Vec<f64> = Vec::new();
    loop {
        for _ in 0..200 {
            let m = margins(&w, &cands);
            let lowest = m.iter().copied().fold(f64::INFINITY, f64::min);
            let active: Vec<usize> = (0..cands.len()).filter(|&k| m[k] <= lowest + tol).collect();
            let grads: Vec<Vec<f64>> = active.iter().map(|&k| cands[k].projected.clone()).collect();
            let mn = min_norm_point(&grads).expect("non-empty active set");
            last_active = active;
            last_coeffs = mn.coefficients.clone();
            if mn.norm() <= 1e-12 * max_proj.max(1e-300) {
                break;
            }
            let v = mn.point;
            let v_norm = norm(&v);
            // Slopes of summands parallel to `t` are zero up to rounding.
            let slopes: Vec<f64> = cands
                .iter()
                .map(|c| {
                    let s = dot(&v, &c.delta);
                    if s.abs() <= 1e-12 * v_norm * norm(&c.delta) {
                        0.0
                    } else {
                        s
                    }
                })
                .collect();
            let eps = match maximize_min_linear(&m, &slopes) {
                Some(eps) => eps,
                // Every margin grows along `v`: go far enough that all are positive.
                None => cands
                    .iter()
                    .zip(&m)
                    .zip(&slopes)
                    .map(|((c, &a), &b)| (norm(&c.delta) / tt.sqrt() - a) / b)
                    .fold(0.0, f64::max),
            };
            if eps <= 0.0 {
                break;
            }
            for (wk, vk) in w.iter_mut().zip(&v) {
                *wk += eps * vk;
            }
            let mut wv = WeightVector::new(w);
            wv.project_to_hyperplane(t);
            w = wv.0;
        }
        if tol <= 1e-10 * scale {
            break;
        }
        tol /= 4.0;
    }

    let m = margins(&w, &cands);
    let lowest = m.iter().copied().fold(f64::INFINITY, f64::min);
    if lowest > 1e-9 * scale {
        return Ok(WeightVector::new(w));
    }

    let mut combo = vec![0.0; d];
    let mut entries = Vec::new();
    for (&k, &coef) in last_active.iter().zip(&last_coeffs) {
        if coef <= 0.0 {
            continue;
        }
        let c = &cands[k];
        for (g, x) in combo.iter_mut().zip(&c.delta) {
            *g += coef * x;
        }
        entries.push(WitnessEntry {
            term: spec.terms()[c.term].name.clone(),
            summand: c.summand,
            delta: spec.terms()[c.term].summands[c.summand].clone(),
            coefficient: coef,
        });
    }
    Err(InfeasibilityWitness {
        entries,
        alpha: dot(&combo, &tf) / tt,
        max_margin: lowest,
    })
}
