use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LearnerError, Result};

/// Regularization used when none is configured.
pub const DEFAULT_C: f64 = 1.0;
/// Stop once the maximal KKT violation drops below this.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl SmoParams {
    pub fn new(c: f64) -> Self {
        SmoParams {
            c,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: 10_000_000,
        }
    }
}

impl Default for SmoParams {
    fn default() -> Self {
        Self::new(DEFAULT_C)
    }
}

/// Trained binary SVM in dual form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    pub labels: Vec<i8>,
    pub c: f64,
    /// Class this model separates from the rest, for one-vs-rest members.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_label: Option<usize>,
    /// SHA-256 of the training kernel.
    pub kernel_checksum: String,
    pub iterations: usize,
    /// Dual objective after every iteration (not serialized).
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl SvmModel {
    /// `Σ α_i y_i k_row[i] + b` over the support vectors.
    pub fn decision_value(&self, k_row: &[f64]) -> Result<f64> {
        if k_row.len() != self.alphas.len() {
            return Err(LearnerError::LengthMismatch {
                expected: self.alphas.len(),
                got: k_row.len(),
            });
        }
        let mut sum = self.bias;
        for &i in &self.support_indices {
            sum += self.alphas[i] * f64::from(self.labels[i]) * k_row[i];
        }
        Ok(sum)
    }

    /// Sign of the decision value; exactly zero maps to +1.
    pub fn predict(&self, k_row: &[f64]) -> Result<i8> {
        Ok(if self.decision_value(k_row)? >= 0.0 { 1 } else { -1 })
    }

    /// Dual objective `Σα − ½ ΣΣ α_i α_j y_i y_j K_ij`.
    pub fn dual_objective(&self, k: &DMatrix<f64>) -> f64 {
        let mut quad = 0.0;
        for &i in &self.support_indices {
            for &j in &self.support_indices {
                quad += self.alphas[i]
                    * self.alphas[j]
                    * f64::from(self.labels[i] * self.labels[j])
                    * k[(i, j)];
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Hex SHA-256 over the dimensions and little-endian entries of `k`.
pub fn kernel_checksum(k: &DMatrix<f64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update((k.nrows() as u64).to_le_bytes());
    hasher.update((k.ncols() as u64).to_le_bytes());
    for v in k.iter() {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

pub(crate) fn validate_kernel(k: &DMatrix<f64>) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(LearnerError::NotSquare {
            rows: k.nrows(),
            cols: k.ncols(),
        });
    }
    for col in 0..k.ncols() {
        for row in 0..k.nrows() {
            if !k[(row, col)].is_finite() {
                return Err(LearnerError::NonFinite { row, col });
            }
        }
    }
    if let Some(&first) = k.iter().next() {
        if k.nrows() > 1 && k.iter().all(|&v| v == first) {
            return Err(LearnerError::Degenerate(first));
        }
    }
    Ok(())
}

pub fn train_binary(k: &DMatrix<f64>, y: &[i8], c: f64) -> Result<SvmModel> {
    train_binary_with(k, y, &SmoParams::new(c))
}

/// Solves `max_α Σα − ½ αᵀQα` subject to `0 ≤ α ≤ C`, `Σ α_i y_i = 0`,
/// with `Q_ij = y_i y_j K_ij`, working on the equivalent minimization.
pub fn train_binary_with(k: &DMatrix<f64>, y: &[i8], params: &SmoParams) -> Result<SvmModel> {
    let c = params.c;
    if !(c > 0.0 && c.is_finite()) {
        return Err(LearnerError::BadRegularization(c));
    }
    validate_kernel(k)?;
    let n = y.len();
    if k.nrows() != n {
        return Err(LearnerError::LengthMismatch {
            expected: k.nrows(),
            got: n,
        });
    }
    if let Some(&bad) = y.iter().find(|&&v| v != 1 && v != -1) {
        return Err(LearnerError::BadLabel(i64::from(bad)));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(LearnerError::OneClass);
    }

    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα − eᵀα
    let mut grad = vec![-1.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    while let Some((i, j, gap)) = select_pair(&alpha, &grad, &yf, c) {
        if gap < params.tolerance {
            break;
        }
        if iterations >= params.max_iterations {
            return Err(LearnerError::NotConverged(iterations));
        }
        iterations += 1;

        let (kii, kjj, kij) = (k[(i, i)], k[(j, j)], k[(i, j)]);
        let eta = (kii + kjj - 2.0 * kij).max(TAU);
        let (old_i, old_j) = (alpha[i], alpha[j]);

        // Move along y_i Δα_i = −y_j Δα_j, then clip to the box.
        if yf[i] != yf[j] {
            let delta = (-grad[i] - grad[j]) / eta;
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
            let delta = (grad[i] - grad[j]) / eta;
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

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (col_i, col_j) = (k.column(i), k.column(j));
        for t in 0..n {
            grad[t] += yf[t] * (yf[i] * col_i[t] * di + yf[j] * col_j[t] * dj);
        }
        // f = ½ αᵀ(G − e); the dual objective is −f
        let objective = -0.5
            * alpha
                .iter()
                .zip(&grad)
                .map(|(a, g)| a * (g - 1.0))
                .sum::<f64>();
        trace.push(objective);
    }

    let bias = compute_bias(&alpha, &grad, &yf, c);
    let support_indices = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SvmModel {
        alphas: alpha,
        bias,
        support_indices,
        labels: y.to_vec(),
        c,
        class_label: None,
        kernel_checksum: kernel_checksum(k),
        iterations,
        objective_trace: trace,
    })
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Maximal violating pair and its KKT gap `m(α) − M(α)`.
fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> Option<(usize, usize, f64)> {
    let mut up = None::<(usize, f64)>;
    let mut low = None::<(usize, f64)>;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) && up.is_none_or(|(_, best)| v > best) {
            up = Some((t, v));
        }
        if in_low(alpha[t], y[t], c) && low.is_none_or(|(_, best)| v < best) {
            low = Some((t, v));
        }
    }
    let ((i, m), (j, mm)) = (up?, low?);
    Some((i, j, m - mm))
}

/// Mean of `y_i − Σ_j α_j y_j K_ij` over free vectors; midpoint of the
/// feasible interval when every α sits at a bound.
fn compute_bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut lb, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
    for t in 0..alpha.len() {
        let b_t = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += b_t;
            free += 1;
        } else if in_up(alpha[t], y[t], c) {
            lb = lb.max(b_t);
        } else {
            ub = ub.min(b_t);
        }
    }
    if free > 0 {
        sum / free as f64
    } else if lb.is_finite() && ub.is_finite() {
        0.5 * (lb + ub)
    } else if lb.is_finite() {
        lb
    } else {
        ub
    }
}

/// Maximal KKT violation of `model` on its training kernel, recomputed from
/// scratch (0 when every condition holds exactly).
pub fn kkt_violation(model: &SvmModel, k: &DMatrix<f64>) -> f64 {
    let n = model.alphas.len();
    let y: Vec<f64> = model.labels.iter().map(|&v| f64::from(v)).collect();
    let grad: Vec<f64> = (0..n)
        .map(|t| {
            let s: f64 = (0..n).map(|j| y[j] * model.alphas[j] * k[(t, j)]).sum();
            y[t] * s - 1.0
        })
        .collect();
    select_pair(&model.alphas, &grad, &y, model.c)
        .map(|(_, _, gap)| gap.max(0.0))
        .unwrap_or(0.0)
}
