//! Dense statevector engine.
//!
//! Qubit `q` is bit `q` of the basis-state index, so qubit 0 is the least
//! significant bit of every bitstring integer. All contracts are insensitive
//! to global phase.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Default limit on simulated register width.
pub const DEFAULT_QUBIT_CAP: usize = 14;
/// Largest cap that may be configured; 2^24 amplitudes is 256 MiB.
pub const MAX_QUBIT_CAP: usize = 24;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("register of {requested} qubits exceeds the simulator cap of {cap} qubits")]
    CapExceeded { requested: usize, cap: usize },
    #[error("a register needs at least one qubit")]
    EmptyRegister,
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("two-qubit gate acts on qubit {0} twice")]
    CoincidentQubits(usize),
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("amplitude vector of length {0} is not a power of two")]
    BadLength(usize),
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("depolarizing probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("shots must be at least 1")]
    NoShots,
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

/// A 2×2 complex matrix, row-major.
pub type Mat2 = [[Complex64; 2]; 2];

/// Gates understood by the simulator.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    /// exp(-iθσʸ/2)
    Ry { qubit: usize, theta: f64 },
    /// exp(-iθσᶻ/2)
    Rz { qubit: usize, theta: f64 },
    /// Controlled-Z, symmetric in its qubits.
    CPhase { a: usize, b: usize },
    Cnot { control: usize, target: usize },
    Hadamard { qubit: usize },
    /// Controlled swap of `a` and `b`.
    CSwap { control: usize, a: usize, b: usize },
    /// Arbitrary single-qubit unitary.
    Su2 { qubit: usize, matrix: Mat2 },
}

impl Gate {
    /// The inverse gate.
    pub fn inverse(&self) -> Gate {
        match self {
            Gate::Ry { qubit, theta } => Gate::Ry {
                qubit: *qubit,
                theta: -theta,
            },
            Gate::Rz { qubit, theta } => Gate::Rz {
                qubit: *qubit,
                theta: -theta,
            },
            Gate::Su2 { qubit, matrix } => Gate::Su2 {
                qubit: *qubit,
                matrix: adjoint(matrix),
            },
            g => g.clone(),
        }
    }

    /// The same gate with every qubit index shifted by `offset`.
    pub fn shifted(&self, offset: usize) -> Gate {
        let mut g = self.clone();
        match &mut g {
            Gate::Ry { qubit, .. }
            | Gate::Rz { qubit, .. }
            | Gate::Hadamard { qubit }
            | Gate::Su2 { qubit, .. } => *qubit += offset,
            Gate::CPhase { a, b } => {
                *a += offset;
                *b += offset;
            }
            Gate::Cnot { control, target } => {
                *control += offset;
                *target += offset;
            }
            Gate::CSwap { control, a, b } => {
                *control += offset;
                *a += offset;
                *b += offset;
            }
        }
        g
    }

    fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Ry { qubit, .. }
            | Gate::Rz { qubit, .. }
            | Gate::Hadamard { qubit }
            | Gate::Su2 { qubit, .. } => vec![*qubit],
            Gate::CPhase { a, b } => vec![*a, *b],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::CSwap { control, a, b } => vec![*control, *a, *b],
        }
    }

    /// The 2×2 matrix of a single-qubit gate.
    pub fn single_qubit_matrix(&self) -> Option<Mat2> {
        match self {
            Gate::Ry { theta, .. } => {
                let (s, c) = (theta / 2.0).sin_cos();
                Some([
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ])
            }
            Gate::Rz { theta, .. } => Some([
                [Complex64::from_polar(1.0, -theta / 2.0), C0],
                [C0, Complex64::from_polar(1.0, theta / 2.0)],
            ]),
            Gate::Hadamard { .. } => {
                let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                Some([[h, h], [h, -h]])
            }
            Gate::Su2 { matrix, .. } => Some(*matrix),
            _ => None,
        }
    }
}

pub fn adjoint(m: &Mat2) -> Mat2 {
    [
        [m[0][0].conj(), m[1][0].conj()],
        [m[0][1].conj(), m[1][1].conj()],
    ]
}

/// Dense amplitudes of an N-qubit pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩ on `n_qubits` qubits, limited by [`DEFAULT_QUBIT_CAP`].
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::zero_with_cap(n_qubits, DEFAULT_QUBIT_CAP)
    }

    /// |0…0⟩ with an explicit register cap (itself limited by [`MAX_QUBIT_CAP`]).
    pub fn zero_with_cap(n_qubits: usize, cap: usize) -> Result<Self> {
        let cap = cap.min(MAX_QUBIT_CAP);
        if n_qubits == 0 {
            return Err(SimError::EmptyRegister);
        }
        if n_qubits > cap {
            return Err(SimError::CapExceeded {
                requested: n_qubits,
                cap,
            });
        }
        let mut amplitudes = vec![C0; 1 << n_qubits];
        amplitudes[0] = C1;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps explicit amplitudes; they must have unit norm within 1e-10.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(SimError::BadLength(len));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBIT_CAP {
            return Err(SimError::CapExceeded {
                requested: n_qubits,
                cap: MAX_QUBIT_CAP,
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(SimError::NotNormalized(norm));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Tensor product `self ⊗ high`: `self` occupies the low qubits.
    pub fn tensor(&self, high: &StateVector) -> Result<StateVector> {
        let n = self.n_qubits + high.n_qubits;
        if n > MAX_QUBIT_CAP {
            return Err(SimError::CapExceeded {
                requested: n,
                cap: MAX_QUBIT_CAP,
            });
        }
        let mut amplitudes = Vec::with_capacity(1 << n);
        for h in &high.amplitudes {
            amplitudes.extend(self.amplitudes.iter().map(|l| l * h));
        }
        Ok(StateVector {
            n_qubits: n,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Computational-basis probabilities |ψ_k|².
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(SimError::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(SimError::QubitOutOfRange {
                index: q,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        let qubits = gate.qubits();
        for (i, &q) in qubits.iter().enumerate() {
            self.check_qubit(q)?;
            if qubits[..i].contains(&q) {
                return Err(SimError::CoincidentQubits(q));
            }
        }
        match *gate {
            Gate::Ry { qubit, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                self.for_each_pair(qubit, |a0, a1| (a0 * c - a1 * s, a0 * s + a1 * c));
            }
            Gate::Rz { qubit, theta } => {
                let lo = Complex64::from_polar(1.0, -theta / 2.0);
                let hi = Complex64::from_polar(1.0, theta / 2.0);
                self.for_each_pair(qubit, |a0, a1| (a0 * lo, a1 * hi));
            }
            Gate::CPhase { a, b } => {
                let mask = (1 << a) | (1 << b);
                for (k, amp) in self.amplitudes.iter_mut().enumerate() {
                    if k & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let cbit = 1 << control;
                let tbit = 1 << target;
                for k in 0..self.amplitudes.len() {
                    if k & cbit != 0 && k & tbit == 0 {
                        self.amplitudes.swap(k, k | tbit);
                    }
                }
            }
            Gate::CSwap { control, a, b } => {
                let cbit = 1 << control;
                let abit = 1 << a;
                let bbit = 1 << b;
                for k in 0..self.amplitudes.len() {
                    if k & cbit != 0 && k & abit != 0 && k & bbit == 0 {
                        self.amplitudes.swap(k, (k & !abit) | bbit);
                    }
                }
            }
            Gate::Hadamard { qubit } | Gate::Su2 { qubit, .. } => {
                let m = gate.single_qubit_matrix().expect("single-qubit gate");
                self.for_each_pair(qubit, |a0, a1| {
                    (m[0][0] * a0 + m[0][1] * a1, m[1][0] * a0 + m[1][1] * a1)
                });
            }
        }
        Ok(())
    }

    fn for_each_pair(&mut self, qubit: usize, f: impl Fn(Complex64, Complex64) -> (Complex64, Complex64)) {
        let stride = 1 << qubit;
        for block in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (b0, b1) = f(*a0, *a1);
                *a0 = b0;
                *a1 = b1;
            }
        }
    }

    /// Applies a gate sequence in order.
    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }
}

/// Pure-function form of [`StateVector::apply`].
pub fn apply_gate(state: &StateVector, gate: &Gate) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(gate)?;
    Ok(out)
}

/// |⟨a|b⟩|²
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// One single-qubit unitary per qubit, V = ⊗ V_l.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBasis {
    pub unitaries: Vec<Mat2>,
    pub seed: u64,
}

impl LocalBasis {
    /// The computational basis (all identities). Its seed is reported as 0.
    pub fn identity(n_qubits: usize) -> Self {
        LocalBasis {
            unitaries: vec![[[C1, C0], [C0, C1]]; n_qubits],
            seed: 0,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.unitaries.len()
    }

    /// V|ψ⟩
    pub fn rotate(&self, state: &StateVector) -> Result<StateVector> {
        if self.n_qubits() != state.n_qubits() {
            return Err(SimError::DimensionMismatch {
                left: self.n_qubits(),
                right: state.n_qubits(),
            });
        }
        let mut out = state.clone();
        for (qubit, u) in self.unitaries.iter().enumerate() {
            out.apply(&Gate::Su2 { qubit, matrix: *u })?;
        }
        Ok(out)
    }
}

/// Haar-random single-qubit unitary: Gram–Schmidt of a complex Gaussian 2×2
/// matrix (QR with a positive real diagonal in R).
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R) -> Mat2 {
    let mut gauss = || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    };
    let (z00, z10, z01, z11) = (gauss(), gauss(), gauss(), gauss());
    let n0 = (z00.norm_sqr() + z10.norm_sqr()).sqrt();
    let (u00, u10) = (z00 / n0, z10 / n0);
    let proj = u00.conj() * z01 + u10.conj() * z11;
    let (w0, w1) = (z01 - proj * u00, z11 - proj * u10);
    let n1 = (w0.norm_sqr() + w1.norm_sqr()).sqrt();
    [[u00, w0 / n1], [u10, w1 / n1]]
}

/// Haar-random local basis, a deterministic function of `seed`.
pub fn haar_local_basis(n_qubits: usize, seed: u64) -> LocalBasis {
    let mut rng = rng::stream(seed, rng::domain::HAAR, 0);
    LocalBasis {
        unitaries: (0..n_qubits).map(|_| haar_unitary(&mut rng)).collect(),
        seed,
    }
}

/// Global depolarizing noise: with probability `p` the prepared state is
/// replaced by I/2^N.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub depolarizing_p: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_worker: BTreeMap<String, f64>,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn depolarizing(p: f64) -> Result<Self> {
        let model = NoiseModel {
            depolarizing_p: p,
            per_worker: BTreeMap::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for &p in std::iter::once(&self.depolarizing_p).chain(self.per_worker.values()) {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::BadProbability(p));
            }
        }
        Ok(())
    }

    /// Depolarizing probability seen by `worker`, falling back to the global value.
    pub fn p_for(&self, worker: Option<&str>) -> f64 {
        worker
            .and_then(|w| self.per_worker.get(w).copied())
            .unwrap_or(self.depolarizing_p)
    }
}

/// Samples the computational-basis outcome distribution of `V|ψ⟩` under global
/// depolarizing noise, returning a dense count vector indexed by bitstring.
///
/// Every shot consumes exactly two uniform draws from the seed's stream, so the
/// first `s` shots of a longer run are the shots of a run with `s` shots.
pub fn sample_counts_dense(
    state: &StateVector,
    basis: &LocalBasis,
    shots: u64,
    p: f64,
    seed: u64,
) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(SimError::BadProbability(p));
    }
    let rotated = basis.rotate(state)?;
    let dim = rotated.dim();
    let mut cdf = Vec::with_capacity(dim);
    let mut acc = 0.0;
    for a in rotated.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let total = acc;
    let mut counts = vec![0u64; dim];
    let mut rng = rng::stream(seed, rng::domain::SHOTS, 0);
    for _ in 0..shots {
        let coin: f64 = rng.random();
        let u: f64 = rng.random();
        let k = if coin < p {
            ((u * dim as f64) as usize).min(dim - 1)
        } else {
            let target = u * total;
            cdf.partition_point(|&c| c <= target).min(dim - 1)
        };
        counts[k] += 1;
    }
    Ok(counts)
}

/// Sparse form of [`sample_counts_dense`]: bitstring → count for observed outcomes.
pub fn sample_counts(
    state: &StateVector,
    basis: &LocalBasis,
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<BTreeMap<usize, u64>> {
    noise.validate()?;
    let dense = sample_counts_dense(state, basis, shots, noise.depolarizing_p, seed)?;
    Ok(dense
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .collect())
}
