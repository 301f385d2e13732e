use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{EstimationError, Result};
use crate::circuits::rbf_reference;
use crate::simulator::{fidelity, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Exact,
    RawEstimate,
    Mitigated,
    RbfReference,
}

/// Provenance carried alongside kernel values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelMetadata {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub basis_seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<u64>,
    /// Noise the measurements were simulated with, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_p: Option<f64>,
    /// Per-state depolarizing probabilities inferred from purities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_estimates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub data_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub workers: Vec<Option<String>>,
    #[serde(default)]
    pub psd_clipped: bool,
}

/// L×L symmetric kernel matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    pub values: DMatrix<f64>,
    pub kind: KernelKind,
    pub purities: Option<Vec<f64>>,
    pub metadata: KernelMetadata,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    kind: KernelKind,
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    purities: Option<Vec<f64>>,
    metadata: KernelMetadata,
}

impl KernelMatrix {
    pub fn new(values: DMatrix<f64>, kind: KernelKind) -> Self {
        KernelMatrix {
            values,
            kind,
            purities: None,
            metadata: KernelMetadata::default(),
        }
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.values - self.values.transpose()).abs().max()
    }

    /// Rows `rows` × columns `cols`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.values[(rows[a], cols[b])])
    }

    /// Writes `<stem>.csv` (L rows of L values) and `<stem>.json` (kind, size,
    /// purities, metadata).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut csv = std::io::BufWriter::new(fs::File::create(dir.join(format!("{stem}.csv")))?);
        for i in 0..self.size() {
            let row: Vec<String> = (0..self.size()).map(|j| format!("{:e}", self.values[(i, j)])).collect();
            writeln!(csv, "{}", row.join(","))?;
        }
        csv.flush()?;
        let sidecar = Sidecar {
            kind: self.kind,
            size: self.size(),
            purities: self.purities.clone(),
            metadata: self.metadata.clone(),
        };
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    /// Reads a matrix written by [`KernelMatrix::write`].
    pub fn read(dir: &Path, stem: &str) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let text = fs::read_to_string(dir.join(format!("{stem}.csv")))?;
        let mut data = Vec::with_capacity(sidecar.size * sidecar.size);
        for (line_no, line) in text.lines().enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| EstimationError::Invalid(format!("kernel csv line {}: {e}", line_no + 1)))?;
            if row.len() != sidecar.size {
                return Err(EstimationError::Invalid(format!(
                    "kernel csv line {} has {} values, expected {}",
                    line_no + 1,
                    row.len(),
                    sidecar.size
                )));
            }
            data.extend(row);
        }
        if data.len() != sidecar.size * sidecar.size {
            return Err(EstimationError::Invalid("kernel csv has the wrong number of rows".into()));
        }
        Ok(KernelMatrix {
            values: DMatrix::from_row_slice(sidecar.size, sidecar.size, &data),
            kind: sidecar.kind,
            purities: sidecar.purities,
            metadata: sidecar.metadata,
        })
    }
}

/// Pairwise fidelities |⟨ψ_i|ψ_j⟩|² of pure states.
pub fn exact_kernel(states: &[StateVector]) -> Result<KernelMatrix> {
    let l = states.len();
    let mut values = DMatrix::<f64>::identity(l, l);
    for i in 0..l {
        for j in (i + 1)..l {
            let f = fidelity(&states[i], &states[j])?;
            values[(i, j)] = f;
            values[(j, i)] = f;
        }
    }
    Ok(KernelMatrix::new(values, KernelKind::Exact))
}

/// RBF reference kernel over feature vectors with weight matrix `f`.
pub fn rbf_kernel(features: &[Vec<f64>], f: &DMatrix<f64>, c: f64) -> Result<KernelMatrix> {
    let l = features.len();
    let mut values = DMatrix::<f64>::identity(l, l);
    for i in 0..l {
        for j in (i + 1)..l {
            let k = rbf_reference(&features[i], &features[j], f, c)?;
            values[(i, j)] = k;
            values[(j, i)] = k;
        }
    }
    Ok(KernelMatrix::new(values, KernelKind::RbfReference))
}

/// Mean absolute off-diagonal error (2 / (L(L−1))) Σ_{i<j} |K_est − K_exact|.
pub fn delta_k(estimate: &KernelMatrix, exact: &KernelMatrix) -> Result<f64> {
    let l = estimate.size();
    if exact.size() != l {
        return Err(EstimationError::SizeMismatch(l, exact.size()));
    }
    if l < 2 {
        return Err(EstimationError::Invalid("ΔK needs at least two states".into()));
    }
    let mut total = 0.0;
    for i in 0..l {
        for j in (i + 1)..l {
            total += (estimate.values[(i, j)] - exact.values[(i, j)]).abs();
        }
    }
    Ok(2.0 * total / (l * (l - 1)) as f64)
}
