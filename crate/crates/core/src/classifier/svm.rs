//! RBF-kernel C-SVM trained with an SMO dual solver.
//!
//! The solver follows the usual formulation
//!
//! ```text
//! min_a  ½ aᵀQa − eᵀa   s.t.  yᵀa = 0,  0 ≤ a_i ≤ C,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! with second-order working-set selection and no shrinking. The full kernel
//! matrix is precomputed, which is fine for the few thousand samples this
//! crate trains on.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    /// RBF width; `None` means `1 / dimension`.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter: 10_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub c: f64,
    pub bias: f64,
    pub dim: usize,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coefficients: Vec<f64>,
}

#[inline]
pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl SvmModel {
    /// `Σ coeff_i K(sv_i, x) + b`; positive means live.
    pub fn decision_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, c)| c * rbf(self.gamma, sv, x))
            .sum();
        Ok(sum + self.bias)
    }
}

/// Trained model plus solver diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmFit {
    pub model: SvmModel,
    /// Dual variables for every training sample, in input order.
    pub alphas: Vec<f64>,
    pub iterations: usize,
    /// Maximal KKT violation `m(a) − M(a)` at exit.
    pub violation: f64,
    /// Dual objective `Σa − ½ aᵀQa` (to be maximized).
    pub dual_objective: f64,
}

fn validate(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("SVM training needs at least two samples"));
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(Error::invalid("feature vectors are empty"));
    }
    for (i, v) in x.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if v.iter().any(|f| !f.is_finite()) {
            return Err(Error::invalid(format!("sample {i} has non-finite features")));
        }
    }
    if y.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::invalid("labels must be +1 or -1"));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::invalid("training data must contain both classes"));
    }
    Ok(dim)
}

pub fn train_svm(x: &[Vec<f64>], y: &[f64], params: &SvmParams) -> Result<SvmFit> {
    let dim = validate(x, y)?;
    let c = params.c;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!("C must be positive, got {c}")));
    }
    let gamma = params.gamma.unwrap_or(1.0 / dim as f64);
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let n = x.len();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let k = rbf(gamma, &x[i], &x[j]);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }
    let kij = |i: usize, j: usize| kernel[i * n + j];

    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let at_upper = |a: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut violation;
    loop {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !at_upper(alpha[t]) } else { !at_lower(alpha[t]) };
            if in_up && v >= gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        // j: second-order choice in I_low
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best_gain = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let in_low = if y[t] > 0.0 { !at_lower(alpha[t]) } else { !at_upper(alpha[t]) };
                if !in_low {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = kij(i, i) + kij(t, t) - 2.0 * kij(i, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let gain = -(b * b) / a;
                    if gain <= best_gain {
                        best_gain = gain;
                        j_sel = Some(t);
                    }
                }
            }
        }
        violation = gmax - gmin;
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            break;
        };
        if violation < params.tol || iterations >= params.max_iter {
            break;
        }
        iterations += 1;

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let mut quad = kij(i, i) + kij(j, j) - 2.0 * kij(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for k in 0..n {
            grad[k] += y[i] * y[k] * kij(i, k) * dai + y[j] * y[k] * kij(j, k) * daj;
        }
    }
    if iterations >= params.max_iter {
        log::warn!("SMO stopped at max_iter={} with violation {violation:e}", params.max_iter);
    }

    // bias: average over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if at_upper(alpha[t]) {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 { free_sum / free_n as f64 } else { (ub + lb) / 2.0 };

    // Σa − ½aᵀQa = −½ Σ a_i (G_i − 1) ... with G = Qa − e: aᵀQa = aᵀ(G + e)
    let dual_objective = alpha
        .iter()
        .zip(&grad)
        .map(|(a, g)| a - 0.5 * a * (g + 1.0))
        .sum();

    let (support_vectors, coefficients) = alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(t, &a)| (x[t].clone(), a * y[t]))
        .unzip();
    Ok(SvmFit {
        model: SvmModel {
            gamma,
            c,
            bias: -rho,
            dim,
            support_vectors,
            coefficients,
        },
        alphas: alpha,
        iterations,
        violation,
        dual_objective,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: f64,
    pub holdout_accuracy: f64,
}

pub const GRID_C: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const GRID_GAMMA_FACTORS: [f64; 3] = [0.25, 1.0, 4.0];

/// Picks `(C, gamma)` from the fixed grid by accuracy on a stratified
/// held-out fraction of the data. Ties keep the earlier grid point.
pub fn grid_search(
    x: &[Vec<f64>],
    y: &[f64],
    base: &SvmParams,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(SvmParams, Vec<GridPoint>)> {
    let dim = validate(x, y)?;
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "holdout fraction must be in (0, 1), got {holdout_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train_idx, mut held_idx) = (Vec::new(), Vec::new());
    for class in [1.0, -1.0] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        if idx.len() < 2 {
            return Err(Error::invalid("too few samples per class for a held-out split"));
        }
        let n_held = ((idx.len() as f64 * holdout_fraction).round() as usize).clamp(1, idx.len() - 1);
        held_idx.extend_from_slice(&idx[..n_held]);
        train_idx.extend_from_slice(&idx[n_held..]);
    }
    train_idx.sort_unstable();
    held_idx.sort_unstable();
    let tx: Vec<_> = train_idx.iter().map(|&i| x[i].clone()).collect();
    let ty: Vec<_> = train_idx.iter().map(|&i| y[i]).collect();

    let mut results = Vec::new();
    let mut best: Option<(f64, SvmParams)> = None;
    for &c in &GRID_C {
        for &factor in &GRID_GAMMA_FACTORS {
            let gamma = factor / dim as f64;
            let params = SvmParams {
                c,
                gamma: Some(gamma),
                ..*base
            };
            let fit = train_svm(&tx, &ty, &params)?;
            let mut correct = 0;
            for &i in &held_idx {
                if fit.model.decision_score(&x[i])?.signum() == y[i] {
                    correct += 1;
                }
            }
            let acc = correct as f64 / held_idx.len() as f64;
            results.push(GridPoint {
                c,
                gamma,
                holdout_accuracy: acc,
            });
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, params));
            }
        }
    }
    Ok((best.expect("grid is non-empty").1, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_bisect() {
        let x = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
        let y = vec![1.0, -1.0];
        let fit = train_svm(&x, &y, &SvmParams::default()).unwrap();
        assert_eq!(fit.model.support_vectors.len(), 2);
        assert!(fit.alphas.iter().all(|&a| a > 0.0));
        let mid = fit.model.decision_score(&[1.0, 0.0]).unwrap();
        assert!(mid.abs() < 1e-9, "midpoint score {mid}");
        assert!(fit.model.decision_score(&[0.0, 0.0]).unwrap() > 0.0);
        assert!(fit.model.decision_score(&[2.0, 0.0]).unwrap() < 0.0);
    }

    #[test]
    fn rejects_bad_training_sets() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(train_svm(&x, &[1.0, 1.0], &SvmParams::default()).is_err());
        assert!(train_svm(&x, &[1.0, 0.0], &SvmParams::default()).is_err());
        assert!(train_svm(&[vec![f64::NAN], vec![1.0]], &[1.0, -1.0], &SvmParams::default()).is_err());
        assert!(train_svm(&[vec![0.0], vec![1.0, 2.0]], &[1.0, -1.0], &SvmParams::default()).is_err());
    }

    #[test]
    fn dimension_checked_at_prediction() {
        let x = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
        let fit = train_svm(&x, &[1.0, -1.0], &SvmParams::default()).unwrap();
        assert!(fit.model.decision_score(&[1.0]).is_err());
    }

    #[test]
    fn box_constraints_hold() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]).collect();
        let y: Vec<f64> = (0..40).map(|i| if (i * 7) % 5 < 2 { 1.0 } else { -1.0 }).collect();
        let params = SvmParams { c: 0.5, ..Default::default() };
        let fit = train_svm(&x, &y, &params).unwrap();
        assert!(fit.alphas.iter().all(|&a| (0.0..=0.5).contains(&a)));
        let balance: f64 = fit.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-9);
        assert!(fit.violation < params.tol);
    }
}
