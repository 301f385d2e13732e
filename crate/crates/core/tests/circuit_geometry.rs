//! Circuit layouts, QFIM and kernel geometry checked against independent
//! finite-difference and closed-form oracles.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qkernel::circuits::{
    build_npqc, build_product_circuit, build_yzcx, evaluate, npqc_reference_params, qfim,
    rank_bound, rbf_reference, small_c_expansion, EncodingSpec,
};
use qkernel::rng::stream;
use qkernel::simulator::{fidelity, StateVector};
use rand::Rng;

fn random_theta(seed: u64, m: usize) -> Vec<f64> {
    let mut rng = stream(seed, 9, 0);
    (0..m).map(|_| rng.random::<f64>() * 2.0 * PI).collect()
}

/// Global-phase-sensitive inner product ⟨a|b⟩.
fn braket(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// QFIM from fourth-order central differences of the statevector.
fn finite_difference_qfim(
    eval: impl Fn(&[f64]) -> StateVector,
    theta: &[f64],
    h: f64,
) -> Vec<Vec<f64>> {
    let m = theta.len();
    let psi = eval(theta).amplitudes().to_vec();
    let derivs: Vec<Vec<Complex64>> = (0..m)
        .map(|j| {
            let at = |d: f64| {
                let mut t = theta.to_vec();
                t[j] += d;
                eval(&t).amplitudes().to_vec()
            };
            let (p1, m1, p2, m2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
            (0..psi.len())
                .map(|k| (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * h))
                .collect()
        })
        .collect();
    let over: Vec<Complex64> = derivs.iter().map(|d| braket(d, &psi)).collect();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| 4.0 * (braket(&derivs[i], &derivs[j]) - over[i] * over[j].conj()).re)
                .collect()
        })
        .collect()
}

#[test]
fn yzcx_qfim_matches_finite_differences() {
    let circuit = build_yzcx(4, 3).unwrap();
    let theta = random_theta(1, circuit.n_params());
    let f = qfim(&circuit, &theta).unwrap();
    let fd = finite_difference_qfim(|t| evaluate(&circuit, t).unwrap(), &theta, 1e-3);
    for i in 0..circuit.n_params() {
        for j in 0..circuit.n_params() {
            assert!((f.matrix[(i, j)] - fd[i][j]).abs() < 1e-7, "F[{i}][{j}]");
        }
    }
}

#[test]
fn npqc_qfim_matches_finite_differences_away_from_reference() {
    let circuit = build_npqc(4, 3).unwrap();
    let theta = random_theta(2, circuit.n_params());
    let f = qfim(&circuit, &theta).unwrap();
    let fd = finite_difference_qfim(|t| evaluate(&circuit, t).unwrap(), &theta, 1e-3);
    for i in 0..circuit.n_params() {
        for j in 0..circuit.n_params() {
            assert!((f.matrix[(i, j)] - fd[i][j]).abs() < 1e-7);
        }
    }
}

#[test]
fn npqc_identity_metric_at_reference() {
    for (n, d) in [(4, 2), (4, 3), (6, 2), (6, 4), (8, 3)] {
        let circuit = build_npqc(n, d).unwrap();
        let theta_r = npqc_reference_params(&circuit).unwrap();
        let f = qfim(&circuit, &theta_r).unwrap();
        assert!(f.max_deviation_from_identity() < 1e-8, "N={n} d={d}");
        assert_eq!(f.rank, circuit.n_params());
    }
}

#[test]
fn npqc_rejects_layers_beyond_its_maximum() {
    assert!(build_npqc(4, 4).is_ok());
    assert!(build_npqc(4, 5).is_err());
    assert!(build_npqc(5, 1).is_err());
}

#[test]
fn yzcx_parameter_count() {
    assert_eq!(build_yzcx(8, 5).unwrap().n_params(), 72);
}

#[test]
fn deep_circuit_rank_saturates_bound() {
    // 3 qubits: the manifold of states has real dimension 2·2^3 − 2 = 14
    let circuit = build_yzcx(3, 12).unwrap();
    assert!(circuit.n_params() > 14);
    let f = qfim(&circuit, &random_theta(3, circuit.n_params())).unwrap();
    assert!(f.rank as u128 <= rank_bound(3));
    assert_eq!(f.rank, 14);
}

#[test]
fn null_directions_leave_the_state_unchanged() {
    let circuit = build_yzcx(3, 10).unwrap();
    let theta = random_theta(4, circuit.n_params());
    let f = qfim(&circuit, &theta).unwrap();
    let psi = evaluate(&circuit, &theta).unwrap();
    let m = circuit.n_params();
    let null = f.eigenvectors.column(m - 1);
    assert!(f.eigenvalues[m - 1].abs() < 1e-9);
    let eps = 1e-3;
    let moved: Vec<f64> = theta.iter().zip(null.iter()).map(|(t, v)| t + eps * v).collect();
    let along_null = 1.0 - fidelity(&psi, &evaluate(&circuit, &moved).unwrap()).unwrap();
    // along the top eigenvector the infidelity is λ ε² / 4
    let top = f.eigenvectors.column(0);
    let moved: Vec<f64> = theta.iter().zip(top.iter()).map(|(t, v)| t + eps * v).collect();
    let along_top = 1.0 - fidelity(&psi, &evaluate(&circuit, &moved).unwrap()).unwrap();
    assert!((along_top - f.eigenvalues[0] * eps * eps / 4.0).abs() < 1e-3 * along_top);
    assert!(along_null < 1e-9, "{along_null}");
}

#[test]
fn product_kernel_closed_form() {
    let n = 8;
    let circuit = build_product_circuit(n).unwrap();
    let mut rng = stream(5, 9, 0);
    for _ in 0..100 {
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        let k = fidelity(&evaluate(&circuit, &a).unwrap(), &evaluate(&circuit, &b).unwrap()).unwrap();
        let want: f64 = a.iter().zip(&b).map(|(x, y)| ((x - y) / 2.0).cos().powi(2)).product();
        assert!((k - want).abs() < 1e-12);
    }
}

#[test]
fn small_encodings_follow_the_metric() {
    let circuit = build_npqc(6, 3).unwrap();
    let theta_r = npqc_reference_params(&circuit).unwrap();
    let spectrum = qfim(&circuit, &theta_r).unwrap();
    let enc = EncodingSpec::new(theta_r.clone(), 0.05, circuit.n_params()).unwrap();
    let mut rng = stream(6, 9, 0);
    let x: Vec<f64> = (0..circuit.n_params()).map(|_| rng.random::<f64>() - 0.5).collect();
    let psi_r = evaluate(&circuit, &theta_r).unwrap();
    let k = fidelity(&psi_r, &evaluate(&circuit, &enc.encode(&x).unwrap()).unwrap()).unwrap();
    let approx = small_c_expansion(&x, &spectrum, 0.05).unwrap();
    assert!((approx.quadratic - approx.spectral).abs() < 1e-12);
    assert!((k - approx.quadratic).abs() < 1e-4);
    let zeros = vec![0.0; x.len()];
    let rbf = rbf_reference(&x, &zeros, &spectrum.matrix, 0.05).unwrap();
    assert!((k - rbf).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_is_symmetric_and_bounded(seed in any::<u64>()) {
        let circuit = build_yzcx(4, 2).unwrap();
        let a = random_theta(seed, circuit.n_params());
        let b = random_theta(seed ^ 0xdead, circuit.n_params());
        let (sa, sb) = (evaluate(&circuit, &a).unwrap(), evaluate(&circuit, &b).unwrap());
        let kab = fidelity(&sa, &sb).unwrap();
        let kba = fidelity(&sb, &sa).unwrap();
        prop_assert!((kab - kba).abs() < 1e-14);
        prop_assert!((-1e-14..=1.0 + 1e-12).contains(&kab));
        prop_assert!((fidelity(&sa, &sa).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evaluated_states_are_normalized(seed in any::<u64>(), d in 1usize..5) {
        let circuit = build_npqc(4, d).unwrap();
        let psi = evaluate(&circuit, &random_theta(seed, circuit.n_params())).unwrap();
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
