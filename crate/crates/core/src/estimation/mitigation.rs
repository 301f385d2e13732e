//! Global-depolarizing noise mitigation.
//!
//! A state depolarized with probability p is ρ = (1−p)|ψ⟩⟨ψ| + p I/2^N, whose
//! purity is (1−p)²(1 − 2^−N) + 2^−N. Overlaps transform as
//! K_b = (1−p_i)(1−p_j)(K − 2^−N) + 2^−N, which [`mitigate`] inverts.

use nalgebra::{DMatrix, SymmetricEigen};

use super::kernel::{KernelKind, KernelMatrix};
use super::{EstimationError, Result};

/// States with an inferred p ≥ 1 − `UNRECOVERABLE_EPS` abort mitigation.
pub const UNRECOVERABLE_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationFormula {
    /// (K_b − 2^−N) / ((1−p_i)(1−p_j)) + 2^−N
    #[default]
    Full,
    /// K_b / sqrt(Tr ρ_i² · Tr ρ_j²), the small-p limit of `Full`.
    SmallNoise,
}

/// Solves purity = (1−p)²(1 − 2^−N) + 2^−N for p, clamped to [0, 1].
///
/// Purities above 1 give p = 0 and purities below 2^−N give p = 1.
pub fn depolarizing_p_from_purity(purity: f64, n_qubits: usize) -> f64 {
    let floor = 0.5f64.powi(n_qubits as i32);
    let ratio = ((purity - floor) / (1.0 - floor)).max(0.0);
    (1.0 - ratio.sqrt()).clamp(0.0, 1.0)
}

/// Full mitigation formula with a unit diagonal.
pub fn mitigate(raw: &KernelMatrix, n_qubits: usize) -> Result<KernelMatrix> {
    mitigate_with(raw, n_qubits, MitigationFormula::Full)
}

pub fn mitigate_with(raw: &KernelMatrix, n_qubits: usize, formula: MitigationFormula) -> Result<KernelMatrix> {
    if raw.kind != KernelKind::RawEstimate {
        return Err(EstimationError::WrongKind {
            found: raw.kind,
            expected: KernelKind::RawEstimate,
        });
    }
    let purities = raw.purities.as_ref().ok_or(EstimationError::MissingPurities)?;
    let l = raw.size();
    if purities.len() != l {
        return Err(EstimationError::SizeMismatch(purities.len(), l));
    }
    let floor = 0.5f64.powi(n_qubits as i32);
    let ps: Vec<f64> = purities
        .iter()
        .map(|&pur| depolarizing_p_from_purity(pur, n_qubits))
        .collect();
    if let Some((index, &p)) = ps.iter().enumerate().find(|(_, &p)| p >= 1.0 - UNRECOVERABLE_EPS) {
        return Err(EstimationError::Unrecoverable { index, p });
    }
    let values = DMatrix::from_fn(l, l, |i, j| {
        if i == j {
            return 1.0;
        }
        let kb = raw.values[(i, j)];
        match formula {
            MitigationFormula::Full => (kb - floor) / ((1.0 - ps[i]) * (1.0 - ps[j])) + floor,
            MitigationFormula::SmallNoise => kb / (purities[i].max(floor) * purities[j].max(floor)).sqrt(),
        }
    });
    let mut metadata = raw.metadata.clone();
    metadata.p_estimates = Some(ps);
    Ok(KernelMatrix {
        values,
        kind: KernelKind::Mitigated,
        purities: raw.purities.clone(),
        metadata,
    })
}

/// Symmetrizes, sets the diagonal to 1 and, when `clip_negative` is set,
/// projects onto the PSD cone by zeroing negative eigenvalues and rescales
/// K_ij / sqrt(K_ii K_jj) back to a unit diagonal, which keeps it PSD.
pub fn prepare_for_svm(kernel: &KernelMatrix, clip_negative: bool) -> KernelMatrix {
    let mut values = (&kernel.values + kernel.values.transpose()) * 0.5;
    values.fill_diagonal(1.0);
    if clip_negative {
        let eig = SymmetricEigen::new(values);
        let clipped = eig.eigenvalues.map(|v| v.max(0.0));
        values = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        let d: Vec<f64> = values.diagonal().iter().map(|&v| v.max(f64::MIN_POSITIVE).sqrt()).collect();
        values = DMatrix::from_fn(values.nrows(), values.ncols(), |i, j| {
            if i == j {
                1.0
            } else {
                0.5 * (values[(i, j)] + values[(j, i)]) / (d[i] * d[j])
            }
        });
    }
    let mut metadata = kernel.metadata.clone();
    metadata.psd_clipped = clip_negative;
    KernelMatrix {
        values,
        kind: kernel.kind,
        purities: kernel.purities.clone(),
        metadata,
    }
}
