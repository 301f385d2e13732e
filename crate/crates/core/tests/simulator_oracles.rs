//! Statevector simulation against an independent dense-matrix oracle, plus
//! sampling and normalization properties.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use qkernel::rng::stream;
use qkernel::simulator::{
    apply_gate, haar_local_basis, haar_unitary, sample_counts_dense, Gate, LocalBasis, Mat2,
    StateVector,
};
use rand::Rng;

type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mat2(m: &Mat2) -> CMat {
    DMatrix::from_fn(2, 2, |i, j| m[i][j])
}

/// Full 2^n operator of a single-qubit matrix on `q` (qubit 0 least significant).
fn embed_1q(m: &CMat, q: usize, n: usize) -> CMat {
    let id = CMat::identity(2, 2);
    let mut out = CMat::identity(1, 1);
    // Kronecker order: most significant qubit first.
    for k in (0..n).rev() {
        let f = if k == q { m } else { &id };
        out = out.kronecker(f);
    }
    out
}

/// Permutation/phase operators built entry by entry from their action on basis states.
fn from_basis_map(n: usize, f: impl Fn(usize) -> (usize, Complex64)) -> CMat {
    let dim = 1 << n;
    let mut m = CMat::zeros(dim, dim);
    for col in 0..dim {
        let (row, amp) = f(col);
        m[(row, col)] = amp;
    }
    m
}

fn bit(x: usize, q: usize) -> usize {
    (x >> q) & 1
}

fn dense_gate(g: &Gate, n: usize) -> CMat {
    match *g {
        Gate::Ry { qubit, theta } => {
            let (cs, sn) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            let m = CMat::from_row_slice(2, 2, &[c(cs, 0.0), c(-sn, 0.0), c(sn, 0.0), c(cs, 0.0)]);
            embed_1q(&m, qubit, n)
        }
        Gate::Rz { qubit, theta } => {
            let m = CMat::from_row_slice(
                2,
                2,
                &[
                    Complex64::from_polar(1.0, -theta / 2.0),
                    c(0.0, 0.0),
                    c(0.0, 0.0),
                    Complex64::from_polar(1.0, theta / 2.0),
                ],
            );
            embed_1q(&m, qubit, n)
        }
        Gate::Hadamard { qubit } => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let m = CMat::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]);
            embed_1q(&m, qubit, n)
        }
        Gate::Su2 { qubit, ref matrix } => embed_1q(&mat2(matrix), qubit, n),
        Gate::CPhase { a, b } => from_basis_map(n, |x| {
            let sign = if bit(x, a) == 1 && bit(x, b) == 1 { -1.0 } else { 1.0 };
            (x, c(sign, 0.0))
        }),
        Gate::Cnot { control, target } => from_basis_map(n, |x| {
            let y = if bit(x, control) == 1 { x ^ (1 << target) } else { x };
            (y, c(1.0, 0.0))
        }),
        Gate::CSwap { control, a, b } => from_basis_map(n, |x| {
            let y = if bit(x, control) == 1 && bit(x, a) != bit(x, b) {
                x ^ (1 << a) ^ (1 << b)
            } else {
                x
            };
            (y, c(1.0, 0.0))
        }),
    }
}

fn random_state(rng: &mut impl Rng, n: usize) -> StateVector {
    let amps: Vec<Complex64> = (0..1 << n)
        .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn distinct(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while out.len() < k {
        let q = rng.random_range(0..n);
        if !out.contains(&q) {
            out.push(q);
        }
    }
    out
}

fn random_gate(rng: &mut impl Rng, n: usize) -> Gate {
    let theta = rng.random::<f64>() * 4.0 * std::f64::consts::PI - 2.0 * std::f64::consts::PI;
    let kind = rng.random_range(0..if n >= 3 { 7 } else { 6 });
    let q = distinct(rng, n, 3.min(n));
    match kind {
        0 => Gate::Ry { qubit: q[0], theta },
        1 => Gate::Rz { qubit: q[0], theta },
        2 => Gate::Hadamard { qubit: q[0] },
        3 => Gate::Su2 {
            qubit: q[0],
            matrix: haar_unitary(rng),
        },
        4 => Gate::CPhase { a: q[0], b: q[1] },
        5 => Gate::Cnot {
            control: q[0],
            target: q[1],
        },
        _ => Gate::CSwap {
            control: q[0],
            a: q[1],
            b: q[2],
        },
    }
}

#[test]
fn gates_match_dense_matrices() {
    let mut rng = stream(11, 1, 0);
    for n in 2..=4 {
        for _ in 0..150 {
            let psi = random_state(&mut rng, n);
            let g = random_gate(&mut rng, n);
            let got = apply_gate(&psi, &g).unwrap();
            let v = DVector::from_column_slice(psi.amplitudes());
            let want = dense_gate(&g, n) * v;
            for (a, b) in got.amplitudes().iter().zip(want.iter()) {
                assert!((a - b).norm() < 1e-12, "{g:?} on {n} qubits");
            }
        }
    }
}

#[test]
fn gate_sequences_match_matrix_products() {
    let mut rng = stream(12, 1, 0);
    let n = 4;
    let gates: Vec<Gate> = (0..40).map(|_| random_gate(&mut rng, n)).collect();
    let mut psi = StateVector::zero(n).unwrap();
    psi.apply_all(&gates).unwrap();
    let mut u = CMat::identity(16, 16);
    for g in &gates {
        u = dense_gate(g, n) * u;
    }
    let want = u.column(0);
    for (a, b) in psi.amplitudes().iter().zip(want.iter()) {
        assert!((a - b).norm() < 1e-11);
    }
}

#[test]
fn local_basis_rotation_matches_tensor_product() {
    let mut rng = stream(13, 1, 0);
    let n = 3;
    let basis = haar_local_basis(n, 99);
    let psi = random_state(&mut rng, n);
    let rotated = basis.rotate(&psi).unwrap();
    let mut u = CMat::identity(1, 1);
    for q in (0..n).rev() {
        u = u.kronecker(&mat2(&basis.unitaries[q]));
    }
    let want = u * DVector::from_column_slice(psi.amplitudes());
    for (a, b) in rotated.amplitudes().iter().zip(want.iter()) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn million_shots_match_born_probabilities() {
    let mut rng = stream(14, 1, 0);
    let psi = random_state(&mut rng, 3);
    let basis = haar_local_basis(3, 5);
    let probs = basis.rotate(&psi).unwrap().probabilities();
    let shots = 1_000_000u64;
    for p in [0.0, 0.3] {
        let counts = sample_counts_dense(&psi, &basis, shots, p, 77).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), shots);
        for (k, &n_k) in counts.iter().enumerate() {
            let expect = (1.0 - p) * probs[k] + p / 8.0;
            let sd = (expect * (1.0 - expect) / shots as f64).sqrt();
            let got = n_k as f64 / shots as f64;
            assert!((got - expect).abs() < 5.0 * sd + 1e-9, "outcome {k}: {got} vs {expect}");
        }
    }
}

#[test]
fn shot_streams_are_prefix_nested() {
    let mut rng = stream(15, 1, 0);
    let psi = random_state(&mut rng, 3);
    let basis = haar_local_basis(3, 3);
    let short = sample_counts_dense(&psi, &basis, 500, 0.4, 9).unwrap();
    let long = sample_counts_dense(&psi, &basis, 2000, 0.4, 9).unwrap();
    // the first 500 shots of the long run are the short run
    assert!(short.iter().zip(&long).all(|(s, l)| s <= l));
    assert_eq!(short, sample_counts_dense(&psi, &basis, 500, 0.4, 9).unwrap());
    let plain = LocalBasis::identity(3).rotate(&psi).unwrap();
    assert_eq!(plain, psi);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_preserve_norm(seed in any::<u64>(), n in 1usize..6, depth in 1usize..30) {
        let mut rng = stream(seed, 2, 0);
        let mut psi = random_state(&mut rng, n);
        for _ in 0..depth {
            let g = if n == 1 {
                Gate::Su2 { qubit: 0, matrix: haar_unitary(&mut rng) }
            } else {
                random_gate(&mut rng, n)
            };
            psi.apply(&g).unwrap();
        }
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_gates_undo(seed in any::<u64>()) {
        let mut rng = stream(seed, 3, 0);
        let psi = random_state(&mut rng, 3);
        let g = random_gate(&mut rng, 3);
        let back = apply_gate(&apply_gate(&psi, &g).unwrap(), &g.inverse()).unwrap();
        for (a, b) in back.amplitudes().iter().zip(psi.amplitudes()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
