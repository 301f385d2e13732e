//! Parameterized encoding circuits, feature encoding, and the quantum Fisher
//! information metric (QFIM).
//!
//! Three layouts are provided:
//!
//! * **NPQC**: a first layer of Ry·Rz on every qubit, followed by layers of
//!   `U_ent(a)` (Ry(π/2) then CPHASE(2k, 2k+1+2a mod N) on each even qubit 2k)
//!   and Ry·Rz rotations on the even qubits. At the reference point
//!   (all y-angles π/2, all z-angles 0) its QFIM is the identity.
//! * **YZ-CX**: Ry·Rz on every qubit then a CNOT chain that alternates between
//!   even and odd offsets.
//! * **Product**: one Ry per qubit.
//!
//! Qubit indices here are zero-based.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::simulator::{Gate, SimError, StateVector};

/// Eigenvalues at or below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("NPQC needs an even number of qubits ≥ 2, got {0}")]
    OddQubits(usize),
    #[error("{requested} layers exceeds the maximum of {max} for {n_qubits} qubits")]
    TooDeep {
        requested: usize,
        max: usize,
        n_qubits: usize,
    },
    #[error("invalid circuit size: {0}")]
    BadSize(String),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("operation requires an NPQC circuit")]
    WrongVariant,
    #[error("encoding scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub type Result<T, E = CircuitError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Y,
    Z,
}

/// One step of a circuit template.
#[derive(Clone, Debug, PartialEq)]
pub enum Operation {
    Fixed(Gate),
    Rotation { axis: Axis, qubit: usize, slot: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum Variant {
    Npqc { layers: usize, shifts: Vec<usize> },
    YzCx { layers: usize },
    Product,
}

/// An ordered gate template with `n_params` parameter slots, each used once.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitSpec {
    n_qubits: usize,
    operations: Vec<Operation>,
    n_params: usize,
    variant: Variant,
}

impl CircuitSpec {
    fn new(n_qubits: usize, operations: Vec<Operation>, variant: Variant) -> Self {
        let n_params = operations
            .iter()
            .filter(|op| matches!(op, Operation::Rotation { .. }))
            .count();
        let spec = CircuitSpec {
            n_qubits,
            operations,
            n_params,
            variant,
        };
        debug_assert!(spec.slots_are_a_permutation());
        spec
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn operations(&self) -> &[Operation] {
        &self.operations
    }

    /// Number of fixed (non-parameterized) gates.
    pub fn n_fixed(&self) -> usize {
        self.operations.len() - self.n_params
    }

    /// Rotation axis of every slot, indexed by slot.
    pub fn slot_axes(&self) -> Vec<Axis> {
        let mut axes = vec![Axis::Y; self.n_params];
        for op in &self.operations {
            if let Operation::Rotation { axis, slot, .. } = op {
                axes[*slot] = *axis;
            }
        }
        axes
    }

    /// True when the slots are exactly `0..n_params`, each used once.
    pub fn slots_are_a_permutation(&self) -> bool {
        let mut seen = vec![false; self.n_params];
        for op in &self.operations {
            if let Operation::Rotation { slot, .. } = op {
                match seen.get_mut(*slot) {
                    Some(s) if !*s => *s = true,
                    _ => return false,
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Concrete gates for parameter vector `theta`.
    pub fn gates(&self, theta: &[f64]) -> Result<Vec<Gate>> {
        if theta.len() != self.n_params {
            return Err(CircuitError::LengthMismatch {
                expected: self.n_params,
                got: theta.len(),
            });
        }
        Ok(self
            .operations
            .iter()
            .map(|op| match op {
                Operation::Fixed(g) => g.clone(),
                Operation::Rotation { axis, qubit, slot } => rotation(*axis, *qubit, theta[*slot]),
            })
            .collect())
    }
}

fn rotation(axis: Axis, qubit: usize, theta: f64) -> Gate {
    match axis {
        Axis::Y => Gate::Ry { qubit, theta },
        Axis::Z => Gate::Rz { qubit, theta },
    }
}

/// Shift factors `a_1, a_2, …` of the NPQC entangling layers.
///
/// Starting from `A = {0, …, N/2−1}` and `s = 1`, each round removes the
/// smallest element `r` of `A`, sets `a_s = r`, copies `a_{s+q} = a_q` for
/// `q < s`, and doubles `s`. The result is truncated to `len` entries.
pub fn shift_sequence(n_qubits: usize, len: usize) -> Result<Vec<usize>> {
    if n_qubits < 2 || !n_qubits.is_multiple_of(2) {
        return Err(CircuitError::OddQubits(n_qubits));
    }
    let half = n_qubits / 2;
    let max_len = (1usize << half) - 1;
    if len > max_len {
        return Err(CircuitError::TooDeep {
            requested: len + 1,
            max: max_len + 1,
            n_qubits,
        });
    }
    let mut seq: Vec<usize> = Vec::with_capacity(max_len);
    for r in 0..half {
        if seq.len() >= len {
            break;
        }
        let prefix = seq.clone();
        seq.push(r);
        seq.extend(prefix);
    }
    seq.truncate(len);
    Ok(seq)
}

/// Largest NPQC depth on `n_qubits`, `2^(N/2)`.
pub fn npqc_max_layers(n_qubits: usize) -> usize {
    1usize << (n_qubits / 2).min(usize::BITS as usize - 2)
}

/// Builds the NPQC with `layers` layers and `N(layers+1)` parameters.
pub fn build_npqc(n_qubits: usize, layers: usize) -> Result<CircuitSpec> {
    if n_qubits < 2 || !n_qubits.is_multiple_of(2) {
        return Err(CircuitError::OddQubits(n_qubits));
    }
    if layers == 0 {
        return Err(CircuitError::BadSize("NPQC needs at least one layer".into()));
    }
    let max = npqc_max_layers(n_qubits);
    if layers > max {
        return Err(CircuitError::TooDeep {
            requested: layers,
            max,
            n_qubits,
        });
    }
    let shifts = shift_sequence(n_qubits, layers - 1)?;
    let mut ops = Vec::new();
    let mut slot = 0;
    let mut push_yz = |ops: &mut Vec<Operation>, qubit: usize| {
        ops.push(Operation::Rotation {
            axis: Axis::Y,
            qubit,
            slot,
        });
        ops.push(Operation::Rotation {
            axis: Axis::Z,
            qubit,
            slot: slot + 1,
        });
        slot += 2;
    };
    for q in 0..n_qubits {
        push_yz(&mut ops, q);
    }
    for &a in &shifts {
        for k in 0..n_qubits / 2 {
            let q = 2 * k;
            ops.push(Operation::Fixed(Gate::Ry {
                qubit: q,
                theta: FRAC_PI_2,
            }));
            ops.push(Operation::Fixed(Gate::CPhase {
                a: q,
                b: (q + 1 + 2 * a) % n_qubits,
            }));
        }
        for k in 0..n_qubits / 2 {
            push_yz(&mut ops, 2 * k);
        }
    }
    Ok(CircuitSpec::new(n_qubits, ops, Variant::Npqc { layers, shifts }))
}

/// NPQC reference point: every y-slot π/2, every z-slot 0.
pub fn npqc_reference_params(circuit: &CircuitSpec) -> Result<Vec<f64>> {
    if !matches!(circuit.variant, Variant::Npqc { .. }) {
        return Err(CircuitError::WrongVariant);
    }
    Ok(circuit
        .slot_axes()
        .into_iter()
        .map(|a| match a {
            Axis::Y => FRAC_PI_2,
            Axis::Z => 0.0,
        })
        .collect())
}

/// Builds the YZ-CX circuit.
///
/// Layer `l` (zero-based) puts Ry·Rz on every qubit, then CNOT(q, q+1) for
/// `q = l mod 2, l mod 2 + 2, …`. In a layer that is not the last, rotations on
/// qubits the layer's CNOT chain leaves idle are dropped: the next layer's
/// rotations act on those qubits directly after them.
pub fn build_yzcx(n_qubits: usize, layers: usize) -> Result<CircuitSpec> {
    if n_qubits < 2 {
        return Err(CircuitError::BadSize(format!(
            "YZ-CX needs at least 2 qubits, got {n_qubits}"
        )));
    }
    if layers == 0 {
        return Err(CircuitError::BadSize("YZ-CX needs at least one layer".into()));
    }
    let mut ops = Vec::new();
    let mut slot = 0;
    for l in 0..layers {
        let offset = l % 2;
        let pairs: Vec<(usize, usize)> = (offset..n_qubits.saturating_sub(1))
            .step_by(2)
            .map(|q| (q, q + 1))
            .collect();
        let last = l + 1 == layers;
        for q in 0..n_qubits {
            let entangled = pairs.iter().any(|&(a, b)| a == q || b == q);
            if entangled || last {
                for axis in [Axis::Y, Axis::Z] {
                    ops.push(Operation::Rotation {
                        axis,
                        qubit: q,
                        slot,
                    });
                    slot += 1;
                }
            }
        }
        for (control, target) in pairs {
            ops.push(Operation::Fixed(Gate::Cnot { control, target }));
        }
    }
    Ok(CircuitSpec::new(n_qubits, ops, Variant::YzCx { layers }))
}

/// Product-state circuit ⊗ Ry(θ_n)|0⟩.
pub fn build_product_circuit(n_qubits: usize) -> Result<CircuitSpec> {
    if n_qubits == 0 {
        return Err(CircuitError::BadSize("product circuit needs at least one qubit".into()));
    }
    let ops = (0..n_qubits)
        .map(|q| Operation::Rotation {
            axis: Axis::Y,
            qubit: q,
            slot: q,
        })
        .collect();
    Ok(CircuitSpec::new(n_qubits, ops, Variant::Product))
}

/// Linear feature encoding θ = θ_r + c·x on the first `feature_dim` slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub reference_params: Vec<f64>,
    pub scale_c: f64,
    pub feature_dim: usize,
}

impl EncodingSpec {
    pub fn new(reference_params: Vec<f64>, scale_c: f64, feature_dim: usize) -> Result<Self> {
        if !(scale_c.is_finite() && scale_c > 0.0) {
            return Err(CircuitError::BadScale(scale_c));
        }
        if feature_dim > reference_params.len() {
            return Err(CircuitError::BadSize(format!(
                "feature_dim {feature_dim} exceeds {} parameter slots",
                reference_params.len()
            )));
        }
        Ok(EncodingSpec {
            reference_params,
            scale_c,
            feature_dim,
        })
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.feature_dim {
            return Err(CircuitError::LengthMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        let mut theta = self.reference_params.clone();
        for (t, xi) in theta.iter_mut().zip(x) {
            *t += self.scale_c * xi;
        }
        Ok(theta)
    }
}

/// Runs the circuit on |0…0⟩.
pub fn evaluate(circuit: &CircuitSpec, theta: &[f64]) -> Result<StateVector> {
    let mut state = StateVector::zero(circuit.n_qubits)?;
    state.apply_all(&circuit.gates(theta)?)?;
    Ok(state)
}

/// QFIM with its spectrum.
#[derive(Clone, Debug)]
pub struct QfimSpectrum {
    pub matrix: DMatrix<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub rank: usize,
}

impl QfimSpectrum {
    /// Builds the spectrum of an arbitrary symmetric PSD weight matrix.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let eig = linalg::symmetric_eigen(&matrix);
        let largest = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        let rank = eig
            .values
            .iter()
            .filter(|&&l| l > RANK_TOL * largest && l > 0.0)
            .count();
        QfimSpectrum {
            matrix,
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
            rank,
        }
    }

    /// Leading `dim`×`dim` block of the metric: the metric seen by features
    /// encoded on the first `dim` slots.
    pub fn feature_block(&self, dim: usize) -> DMatrix<f64> {
        self.matrix.view((0, 0), (dim, dim)).into_owned()
    }

    /// Largest entrywise deviation from the identity.
    pub fn max_deviation_from_identity(&self) -> f64 {
        let n = self.matrix.nrows();
        (&self.matrix - DMatrix::<f64>::identity(n, n)).abs().max()
    }
}

/// Upper bound 2^(N+1) − 2 on the QFIM rank of an N-qubit circuit.
pub fn rank_bound(n_qubits: usize) -> u128 {
    (1u128 << (n_qubits + 1)) - 2
}

/// Exact derivative states ∂_jψ via the shift identity
/// ∂_θ R(θ) = (R(θ+π/2) − R(θ−π/2)) / (2√2) for R(θ) = exp(−iθσ/2).
pub fn gradient_states(circuit: &CircuitSpec, theta: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    let denom = 2.0 * std::f64::consts::SQRT_2;
    (0..circuit.n_params)
        .map(|j| {
            let mut plus = theta.to_vec();
            plus[j] += FRAC_PI_2;
            let mut minus = theta.to_vec();
            minus[j] -= FRAC_PI_2;
            let a = evaluate(circuit, &plus)?;
            let b = evaluate(circuit, &minus)?;
            Ok(a.amplitudes()
                .iter()
                .zip(b.amplitudes())
                .map(|(x, y)| (x - y) / denom)
                .collect())
        })
        .collect()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// F_ij = 4 Re[⟨∂_iψ|∂_jψ⟩ − ⟨∂_iψ|ψ⟩⟨ψ|∂_jψ⟩] from parameter-shift gradient
/// states, with its Jacobi eigendecomposition.
pub fn qfim(circuit: &CircuitSpec, theta: &[f64]) -> Result<QfimSpectrum> {
    let psi = evaluate(circuit, theta)?;
    let grads = gradient_states(circuit, theta)?;
    let m = circuit.n_params;
    let overlaps: Vec<Complex64> = grads.iter().map(|g| dot(g, psi.amplitudes())).collect();
    let mut f = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = 4.0 * (dot(&grads[i], &grads[j]) - overlaps[i] * overlaps[j].conj()).re;
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    Ok(QfimSpectrum::from_matrix(f))
}

fn check_square(f: &DMatrix<f64>, n: usize) -> Result<()> {
    if f.nrows() != n || f.ncols() != n {
        return Err(CircuitError::LengthMismatch {
            expected: n,
            got: f.nrows(),
        });
    }
    Ok(())
}

/// Weighted squared distance (x_i − x_j)ᵀ F (x_i − x_j).
pub fn weighted_distance(xi: &[f64], xj: &[f64], f: &DMatrix<f64>) -> Result<f64> {
    if xi.len() != xj.len() {
        return Err(CircuitError::LengthMismatch {
            expected: xi.len(),
            got: xj.len(),
        });
    }
    check_square(f, xi.len())?;
    let d = DVector::from_iterator(xi.len(), xi.iter().zip(xj).map(|(a, b)| a - b));
    Ok((d.transpose() * f * &d)[(0, 0)])
}

/// RBF kernel exp(−(c²/4)(x_i − x_j)ᵀ F (x_i − x_j)) weighted by the QFIM.
pub fn rbf_reference(xi: &[f64], xj: &[f64], f: &DMatrix<f64>, c: f64) -> Result<f64> {
    let d = weighted_distance(xi, xj, f)?;
    Ok((-(c * c / 4.0) * d.max(0.0)).exp())
}

/// Both forms of the small-c kernel expansion around θ_r.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallCExpansion {
    /// 1 − (c²/4)·xᵀFx
    pub quadratic: f64,
    /// 1 − (c²/4)·Σ λ_k |⟨x, μ_k⟩|²
    pub spectral: f64,
}

pub fn small_c_expansion(x: &[f64], spectrum: &QfimSpectrum, c: f64) -> Result<SmallCExpansion> {
    check_square(&spectrum.matrix, x.len())?;
    let xv = DVector::from_column_slice(x);
    let quad = (xv.transpose() * &spectrum.matrix * &xv)[(0, 0)];
    let weighted: f64 = spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let g = spectrum.eigenvectors.column(k).dot(&xv);
            lambda * g * g
        })
        .sum();
    let s = c * c / 4.0;
    Ok(SmallCExpansion {
        quadratic: 1.0 - s * quad,
        spectral: 1.0 - s * weighted,
    })
}
