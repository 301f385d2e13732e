//! Pairwise overlap tests: one circuit execution per state pair.

use super::{EstimationError, Result};
use crate::circuits::{evaluate, CircuitSpec};
use crate::simulator::{sample_counts_dense, Gate, LocalBasis, NoiseModel, StateVector, DEFAULT_QUBIT_CAP};

/// Inversion test: prepares U†(θ_j)U(θ_i)|0⟩ and returns the observed
/// frequency of the all-zeros outcome. Under depolarizing noise p its
/// expectation is (1−p)K + p/2^N.
pub fn inversion_test(
    circuit: &CircuitSpec,
    theta_i: &[f64],
    theta_j: &[f64],
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<f64> {
    noise.validate()?;
    let mut state = evaluate(circuit, theta_i)?;
    let inverse: Vec<Gate> = circuit.gates(theta_j)?.iter().rev().map(Gate::inverse).collect();
    state.apply_all(&inverse)?;
    let counts = sample_counts_dense(
        &state,
        &LocalBasis::identity(circuit.n_qubits()),
        shots,
        noise.depolarizing_p,
        seed,
    )?;
    Ok(counts[0] as f64 / shots as f64)
}

/// Swap test on 2N+1 qubits: U(θ_i) on qubits 0..N, U(θ_j) on N..2N, and an
/// ancilla at 2N put through H · CSWAP · H. The ancilla reads 1 with
/// probability f = (1 − K)/2, so the estimate is 1 − 2f.
pub fn swap_test(circuit: &CircuitSpec, theta_i: &[f64], theta_j: &[f64], shots: u64, seed: u64) -> Result<f64> {
    let n = circuit.n_qubits();
    let width = 2 * n + 1;
    if width > DEFAULT_QUBIT_CAP {
        return Err(EstimationError::Sim(crate::simulator::SimError::CapExceeded {
            requested: width,
            cap: DEFAULT_QUBIT_CAP,
        }));
    }
    let mut state = StateVector::zero(width)?;
    state.apply_all(&circuit.gates(theta_i)?)?;
    let shifted: Vec<Gate> = circuit.gates(theta_j)?.iter().map(|g| g.shifted(n)).collect();
    state.apply_all(&shifted)?;
    let ancilla = 2 * n;
    state.apply(&Gate::Hadamard { qubit: ancilla })?;
    for q in 0..n {
        state.apply(&Gate::CSwap {
            control: ancilla,
            a: q,
            b: q + n,
        })?;
    }
    state.apply(&Gate::Hadamard { qubit: ancilla })?;
    let counts = sample_counts_dense(&state, &LocalBasis::identity(width), shots, 0.0, seed)?;
    let ones: u64 = counts
        .iter()
        .enumerate()
        .filter(|(k, _)| k >> ancilla & 1 == 1)
        .map(|(_, c)| c)
        .sum();
    Ok(1.0 - 2.0 * ones as f64 / shots as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::build_product_circuit;
    use std::f64::consts::PI;

    #[test]
    fn identical_states() {
        let c = build_product_circuit(3).unwrap();
        let t = [0.3, 1.2, -0.4];
        assert_eq!(inversion_test(&c, &t, &t, 1000, &NoiseModel::noiseless(), 1).unwrap(), 1.0);
        assert_eq!(swap_test(&c, &t, &t, 1000, 2).unwrap(), 1.0);
    }

    #[test]
    fn orthogonal_states() {
        let c = build_product_circuit(2).unwrap();
        assert_eq!(
            inversion_test(&c, &[0.0, 0.0], &[PI, 0.0], 1000, &NoiseModel::noiseless(), 1).unwrap(),
            0.0
        );
        let est = swap_test(&c, &[0.0, 0.0], &[PI, 0.0], 20_000, 3).unwrap();
        // f ~ Binomial(s, 1/2): 4σ on 1 − 2f is 4/sqrt(s)
        assert!(est.abs() < 4.0 / (20_000f64).sqrt());
    }

    #[test]
    fn swap_test_cap() {
        let c = build_product_circuit(7).unwrap();
        assert!(matches!(
            swap_test(&c, &[0.0; 7], &[0.0; 7], 10, 1),
            Err(EstimationError::Sim(crate::simulator::SimError::CapExceeded { requested: 15, .. }))
        ));
    }
}
