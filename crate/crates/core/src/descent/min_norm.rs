//! Minimum-norm point of the convex hull of a finite point set.
//!
//! Wolfe's active-set algorithm: keep a corral of affinely independent
//! points, minimize the norm over their affine hull, and drop points whose
//! affine coefficients turn non-positive. The returned coefficients express
//! the point as a convex combination of the inputs.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MinNormError {
    #[error("min-norm point of an empty set")]
    Empty,
    #[error("input vectors have inconsistent dimensions")]
    RaggedInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormPoint {
    pub point: Vec<f64>,
    /// Convex weights, one per input vector.
    pub coefficients: Vec<f64>,
    /// False when the iteration limit was hit; the point is then the best
    /// found so far.
    pub converged: bool,
}

impl MinNormPoint {
    pub fn norm(&self) -> f64 {
        norm(&self.point)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

const POSITIVE: f64 = 1e-14;

fn combine(vectors: &[Vec<f64>], corral: &[usize], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (&k, &lam) in corral.iter().zip(weights) {
        for (xi, vi) in x.iter_mut().zip(&vectors[k]) {
            *xi += lam * vi;
        }
    }
    x
}

/// Affine coefficients (summing to one) of the min-norm point of the affine
/// hull of the corral.
fn affine_minimizer(vectors: &[Vec<f64>], corral: &[usize], dim: usize) -> Vec<f64> {
    let m = corral.len();
    if m == 1 {
        return vec![1.0];
    }
    let base = &vectors[corral[0]];
    let diffs = DMatrix::from_fn(dim, m - 1, |r, c| vectors[corral[c + 1]][r] - base[r]);
    let rhs = DVector::from_fn(dim, |r, _| -base[r]);
    let scale = diffs.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    let beta = diffs
        .svd(true, true)
        .solve(&rhs, 1e-13 * scale)
        .unwrap_or_else(|_| DVector::zeros(m - 1));
    let mut alpha = Vec::with_capacity(m);
    alpha.push(1.0 - beta.sum());
    alpha.extend(beta.iter().copied());
    alpha
}

/// Minimum-norm point of `conv(vectors)`.
///
/// If the result `m` is nonzero then `m . g >= |m|^2` for every input `g`,
/// up to rounding.
pub fn min_norm_point(vectors: &[Vec<f64>]) -> Result<MinNormPoint, MinNormError> {
    let first = vectors.first().ok_or(MinNormError::Empty)?;
    let dim = first.len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(MinNormError::RaggedInput);
    }
    let n = vectors.len();
    let sq: Vec<f64> = vectors.iter().map(|v| dot(v, v)).collect();
    let scale = sq.iter().copied().fold(0.0, f64::max);
    let start = (0..n).min_by(|&a, &b| sq[a].total_cmp(&sq[b])).unwrap();

    let mut corral = vec![start];
    let mut weights = vec![1.0];
    let mut x = vectors[start].clone();
    let mut converged = false;
    let max_major = 50 + 10 * n;

    for _ in 0..max_major {
        let xx = dot(&x, &x);
        if xx <= 1e-30 * scale.max(1e-300) {
            converged = true;
            break;
        }
        let (j, best) = (0..n)
            .map(|k| (k, dot(&x, &vectors[k])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if best >= xx - 1e-12 * scale || corral.contains(&j) {
            converged = true;
            break;
        }
        corral.push(j);
        weights.push(0.0);

        loop {
            let alpha = affine_minimizer(vectors, &corral, dim);
            if alpha.iter().all(|&a| a > POSITIVE) {
                weights = alpha;
                break;
            }
            // Move from the current weights toward alpha until a weight hits zero.
            let theta = weights
                .iter()
                .zip(&alpha)
                .filter(|(_, a)| **a <= POSITIVE)
                .map(|(&l, &a)| if l - a > 0.0 { l / (l - a) } else { 0.0 })
                .fold(1.0f64, f64::min)
                .clamp(0.0, 1.0);
            for (l, a) in weights.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            let before = corral.len();
            let mut keep_c = Vec::with_capacity(before);
            let mut keep_w = Vec::with_capacity(before);
            for (&k, &l) in corral.iter().zip(&weights) {
                if l > POSITIVE {
                    keep_c.push(k);
                    keep_w.push(l);
                }
            }
            if keep_c.len() == before {
                // Rounding left every weight positive; drop the smallest.
                let drop = (0..before).min_by(|&a, &b| weights[a].total_cmp(&weights[b])).unwrap();
                keep_c.remove(drop);
                keep_w.remove(drop);
            }
            if keep_c.is_empty() {
                keep_c.push(j);
                keep_w.push(1.0);
            }
            let total: f64 = keep_w.iter().sum();
            keep_w.iter_mut().for_each(|l| *l /= total);
            corral = keep_c;
            weights = keep_w;
            if corral.len() == 1 {
                break;
            }
        }
        x = combine(vectors, &corral, &weights, dim);
    }

    let mut coefficients = vec![0.0; n];
    for (&k, &l) in corral.iter().zip(&weights) {
        coefficients[k] += l;
    }
    Ok(MinNormPoint {
        point: x,
        coefficients,
        converged,
    })
}
