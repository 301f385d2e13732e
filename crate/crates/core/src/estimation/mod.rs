//! Kernel estimation from randomized measurements, depolarizing-noise
//! mitigation, overlap-test baselines, error metrics, and measurement budgets.

mod baselines;
mod budget;
mod estimator;
mod kernel;
mod mitigation;
mod record;
mod sweep;

pub use baselines::{inversion_test, swap_test};
pub use budget::{budget, BudgetReport, Strategy};
pub use estimator::{
    estimate_entry, estimate_entry_fast, estimate_entry_naive, estimate_kernel, estimate_purity,
    hamming_transform, hamming_weight, Bitstring,
};
pub use kernel::{delta_k, exact_kernel, rbf_kernel, KernelKind, KernelMatrix, KernelMetadata};
pub use mitigation::{
    depolarizing_p_from_purity, mitigate, mitigate_with, prepare_for_svm, MitigationFormula,
    UNRECOVERABLE_EPS,
};
pub use record::{
    basis_seeds, collect_record, collect_record_from_state, exact_record, shot_seed, read_jsonl, write_jsonl,
    MeasurementRecord,
};
pub use sweep::{fit_power_law, s_min_sweep, SminRow, SweepSetup};

use thiserror::Error;

use crate::circuits::CircuitError;
use crate::simulator::SimError;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("records use different basis seeds (records {left} and {right})")]
    BasisMismatch { left: usize, right: usize },
    #[error("records have {left} and {right} qubits")]
    QubitMismatch { left: usize, right: usize },
    #[error("at least one measurement basis is required")]
    NoBases,
    #[error("purity needs at least 2 shots per basis, got {0}")]
    TooFewShots(u64),
    #[error("bitstrings have lengths {0} and {1}")]
    BitstringLength(usize, usize),
    #[error("invalid bitstring {0:?}")]
    BadBitstring(String),
    #[error("fast and naive estimators disagree: {fast} vs {naive}")]
    RouteDisagreement { fast: f64, naive: f64 },
    #[error("kernel has kind {found:?}, expected {expected:?}")]
    WrongKind { found: KernelKind, expected: KernelKind },
    #[error("raw kernel carries no purities")]
    MissingPurities,
    #[error("state {index} is fully depolarized (p = {p:.6}); kernel entries cannot be recovered")]
    Unrecoverable { index: usize, p: f64 },
    #[error("kernel sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = EstimationError> = std::result::Result<T, E>;
