//! Randomized-measurement estimation: route equivalence, statistical scaling,
//! mitigation against density-matrix oracles, overlap tests and budgets.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use qkernel::circuits::build_yzcx;
use qkernel::estimation::{
    basis_seeds, budget, collect_record_from_state, estimate_entry, estimate_entry_fast,
    estimate_entry_naive, estimate_kernel, estimate_purity, exact_record, inversion_test,
    mitigate, read_jsonl, swap_test, write_jsonl, EstimationError, KernelKind, KernelMatrix,
    MeasurementRecord, Strategy,
};
use qkernel::rng::stream;
use qkernel::simulator::{fidelity, NoiseModel, StateVector};
use rand::Rng;

fn random_state(seed: u64, n: usize) -> StateVector {
    let mut rng = stream(seed, 21, 0);
    let amps: Vec<Complex64> = (0..1 << n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn sparse_record(rng: &mut impl Rng, index: usize, n: usize, bases: &[u64]) -> MeasurementRecord {
    let dim = 1usize << n;
    let distributions = bases
        .iter()
        .map(|_| {
            let support = rng.random_range(1..=dim.min(12));
            let mut d = BTreeMap::new();
            for _ in 0..support {
                d.insert(rng.random_range(0..dim), rng.random::<f64>());
            }
            let total: f64 = d.values().sum();
            d.values_mut().for_each(|v| *v /= total);
            d
        })
        .collect();
    MeasurementRecord {
        data_index: index,
        n_qubits: n,
        bases: bases.to_vec(),
        distributions,
        shots_per_basis: Some(1000),
        worker_id: None,
    }
}

#[test]
fn transform_and_double_sum_agree_on_random_sparse_records() {
    let mut rng = stream(31, 21, 0);
    for case in 0..200 {
        let n = rng.random_range(1..=10);
        let r = rng.random_range(1..=4);
        let bases = basis_seeds(case, r);
        let a = sparse_record(&mut rng, 0, n, &bases);
        let b = sparse_record(&mut rng, 1, n, &bases);
        let fast = estimate_entry_fast(&a, &b).unwrap();
        let naive = estimate_entry_naive(&a, &b).unwrap();
        assert!((fast - naive).abs() < 1e-9, "case {case}: {fast} vs {naive}");
        let k = estimate_kernel(&[a, b]).unwrap();
        assert!((k.get(0, 1) - naive).abs() < 1e-9);
    }
}

#[test]
fn exact_distributions_give_unbiased_overlaps() {
    // Over many exact records the basis average converges to Tr(ρ_i ρ_j).
    let (a, b) = (random_state(1, 3), random_state(2, 3));
    let k = fidelity(&a, &b).unwrap();
    let bases = basis_seeds(7, 4000);
    let est = estimate_entry(
        &exact_record(0, &a, &bases, 0.0).unwrap(),
        &exact_record(1, &b, &bases, 0.0).unwrap(),
    )
    .unwrap();
    assert!((est - k).abs() < 0.02, "{est} vs {k}");
    let purity = estimate_purity(&exact_record(0, &a, &bases, 0.0).unwrap()).unwrap();
    assert!((purity - 1.0).abs() < 0.03);
}

#[test]
fn error_shrinks_as_inverse_square_root_of_bases() {
    let (a, b) = (random_state(3, 3), random_state(4, 3));
    let k = fidelity(&a, &b).unwrap();
    let trials = 150;
    let rs = [8usize, 32, 128, 512];
    let rms: Vec<f64> = rs
        .iter()
        .map(|&r| {
            let sq: f64 = (0..trials)
                .map(|t| {
                    let bases = basis_seeds(1000 * r as u64 + t, r);
                    let est = estimate_entry(
                        &exact_record(0, &a, &bases, 0.0).unwrap(),
                        &exact_record(1, &b, &bases, 0.0).unwrap(),
                    )
                    .unwrap();
                    (est - k).powi(2)
                })
                .sum();
            (sq / trials as f64).sqrt()
        })
        .collect();
    let scaled: Vec<f64> = rs.iter().zip(&rms).map(|(&r, e)| e * (r as f64).sqrt()).collect();
    let (lo, hi) = scaled
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    assert!(hi / lo < 2.0, "rms·√r = {scaled:?}");
}

/// Tr(ρ_a ρ_b) for depolarized pure states, built as explicit density matrices.
fn depolarized_overlap(a: &StateVector, pa: f64, b: &StateVector, pb: f64) -> f64 {
    let rho = |s: &StateVector, p: f64| {
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        let d = s.dim();
        (&v * v.adjoint()) * Complex64::new(1.0 - p, 0.0)
            + DMatrix::<Complex64>::identity(d, d) * Complex64::new(p / d as f64, 0.0)
    };
    (rho(a, pa) * rho(b, pb)).trace().re
}

#[test]
fn mitigation_inverts_analytic_depolarizing() {
    for n in 1..=4 {
        let l = 5;
        let states: Vec<StateVector> = (0..l).map(|i| random_state(100 + i as u64, n)).collect();
        let ps = [0.0, 0.1, 0.35, 0.6, 0.9];
        let raw_values = DMatrix::from_fn(l, l, |i, j| depolarized_overlap(&states[i], ps[i], &states[j], ps[j]));
        let purities: Vec<f64> = (0..l).map(|i| raw_values[(i, i)]).collect();
        let mut raw = KernelMatrix::new(raw_values, KernelKind::RawEstimate);
        raw.purities = Some(purities);
        let m = mitigate(&raw, n).unwrap();
        for i in 0..l {
            for j in 0..l {
                let k = fidelity(&states[i], &states[j]).unwrap();
                assert!((m.get(i, j) - k).abs() < 1e-10, "N={n} ({i},{j})");
            }
        }
        let inferred = m.metadata.p_estimates.unwrap();
        for (got, want) in inferred.iter().zip(ps) {
            assert!((got - want).abs() < 1e-10);
        }
    }
}

#[test]
fn fully_depolarized_state_is_unrecoverable() {
    let n = 2;
    let floor = 0.25;
    let mut raw = KernelMatrix::new(DMatrix::from_element(2, 2, floor), KernelKind::RawEstimate);
    raw.purities = Some(vec![1.0, floor]);
    assert!(matches!(mitigate(&raw, n), Err(EstimationError::Unrecoverable { index: 1, .. })));
}

#[test]
fn sampled_purity_at_half_depolarization() {
    let n = 8;
    let p: f64 = 0.5;
    let want = (1.0 - p) * (1.0 - p) * (1.0 - 1.0 / 256.0) + 1.0 / 256.0;
    assert!((want - 0.2529).abs() < 1e-4);
    let circuit = build_yzcx(n, 3).unwrap();
    let mut rng = stream(41, 21, 0);
    let theta: Vec<f64> = (0..circuit.n_params()).map(|_| rng.random::<f64>() * 6.3).collect();
    let state = qkernel::circuits::evaluate(&circuit, &theta).unwrap();
    // one record per basis gives independent per-basis purity estimates
    let values: Vec<f64> = basis_seeds(42, 200)
        .iter()
        .enumerate()
        .map(|(k, &seed)| {
            let rec = collect_record_from_state(0, &state, &[seed], 4096, p, 1000 + k as u64).unwrap();
            estimate_purity(&rec).unwrap()
        })
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    let sigma = (var / values.len() as f64).sqrt();
    assert!((mean - want).abs() < 4.0 * sigma, "{mean} vs {want} (σ {sigma})");
}

#[test]
fn overlap_tests_within_four_sigma() {
    let circuit = build_yzcx(2, 2).unwrap();
    let mut rng = stream(51, 21, 0);
    let shots = 100_000u64;
    for case in 0..5u64 {
        let a: Vec<f64> = (0..circuit.n_params()).map(|_| rng.random::<f64>() * 6.3).collect();
        let b: Vec<f64> = (0..circuit.n_params()).map(|_| rng.random::<f64>() * 6.3).collect();
        let k = fidelity(
            &qkernel::circuits::evaluate(&circuit, &a).unwrap(),
            &qkernel::circuits::evaluate(&circuit, &b).unwrap(),
        )
        .unwrap();
        for p in [0.0, 0.3] {
            let expect = (1.0 - p) * k + p / 4.0;
            let sd = (expect * (1.0 - expect) / shots as f64).sqrt();
            let got = inversion_test(&circuit, &a, &b, shots, &NoiseModel::depolarizing(p).unwrap(), case).unwrap();
            assert!((got - expect).abs() < 4.0 * sd + 1e-12, "inversion {got} vs {expect}");
        }
        let f = (1.0 - k) / 2.0;
        let sd = 2.0 * (f * (1.0 - f) / shots as f64).sqrt();
        let got = swap_test(&circuit, &a, &b, shots, case).unwrap();
        assert!((got - k).abs() < 4.0 * sd + 1e-12, "swap {got} vs {k}");
    }
}

#[test]
fn records_round_trip_through_jsonl() {
    let bases = basis_seeds(5, 3);
    let records: Vec<MeasurementRecord> = (0..3)
        .map(|i| {
            collect_record_from_state(i, &random_state(60 + i as u64, 4), &bases, 256, 0.2, i as u64)
                .unwrap()
                .with_worker("qpu-a")
        })
        .collect();
    let mut buf = Vec::new();
    write_jsonl(&records, &mut buf).unwrap();
    let back = read_jsonl(buf.as_slice()).unwrap();
    assert_eq!(back, records);
}

#[test]
fn kernel_files_round_trip() {
    let bases = basis_seeds(6, 4);
    let records: Vec<MeasurementRecord> = (0..4)
        .map(|i| collect_record_from_state(i, &random_state(70 + i as u64, 3), &bases, 512, 0.1, 9).unwrap())
        .collect();
    let raw = estimate_kernel(&records).unwrap();
    let dir = tempfile::tempdir().unwrap();
    raw.write(dir.path(), "raw").unwrap();
    let back = KernelMatrix::read(dir.path(), "raw").unwrap();
    assert_eq!(back.kind, KernelKind::RawEstimate);
    assert_eq!(back.purities, raw.purities);
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(back.get(i, j), raw.get(i, j));
        }
    }
}

#[test]
fn mismatched_bases_are_rejected() {
    let s = random_state(80, 3);
    let a = exact_record(0, &s, &basis_seeds(1, 4), 0.0).unwrap();
    let b = exact_record(1, &s, &basis_seeds(2, 4), 0.0).unwrap();
    assert!(matches!(estimate_entry(&a, &b), Err(EstimationError::BasisMismatch { .. })));
    assert!(matches!(estimate_kernel(&[a, b]), Err(EstimationError::BasisMismatch { .. })));
}

#[test]
fn digits_scale_budgets() {
    let rate = 5000.0;
    let rm = budget(Strategy::Randomized, 1790, 8192, 8);
    assert_eq!(rm.n_circuit_executions, 117_309_440);
    assert!((rm.hours_at(rate) - 6.517).abs() < 1e-3);
    let inv = budget(Strategy::Inversion, 1790, 8192, 8);
    assert_eq!(inv.n_circuit_executions, 13_116_661_760);
    assert_eq!(budget(Strategy::Swap, 1790, 8192, 8).n_circuit_executions, 13_116_661_760);
    assert!((inv.hours_at(rate) - 728.7).abs() < 0.1);
    let large = budget(Strategy::Randomized, 60_000, 8192, 8);
    assert!((large.hours_at(rate) - 218.45).abs() < 0.01);
}
