//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Used for the quantum Fisher information metric and for PCA, where the
//! matrices are at most a few hundred rows and full accuracy matters more than
//! speed.

use nalgebra::DMatrix;

/// Eigenpairs of a real symmetric matrix, sorted by descending eigenvalue.
/// Column `k` of `vectors` belongs to `values[k]`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 100;

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi sweeps until the off-diagonal Frobenius norm drops below
/// `tol` times the Frobenius norm of the input.
///
/// The input is symmetrized as `(A + Aᵀ)/2` first. Panics if `a` is not square.
pub fn symmetric_eigen_with_tol(a: &DMatrix<f64>, tol: f64) -> SymmetricEigen {
    assert!(a.is_square(), "symmetric_eigen needs a square matrix");
    let n = a.nrows();
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm().max(f64::MIN_POSITIVE);

    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_diagonal_norm(&m) > tol * scale {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // rotation angle that zeroes m[p][q]
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    SymmetricEigen {
        values,
        vectors,
        sweeps,
    }
}

/// Jacobi eigendecomposition at the default convergence threshold of 1e-12.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> SymmetricEigen {
    symmetric_eigen_with_tol(a, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_matrix_is_sorted() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let e = symmetric_eigen(&a);
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = symmetric_eigen(&a);
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn reconstructs_random_symmetric(entries in proptest::collection::vec(-5.0f64..5.0, 36)) {
            let b = DMatrix::from_vec(6, 6, entries);
            let a = &b + b.transpose();
            let e = symmetric_eigen(&a);
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
            let rebuilt = &e.vectors * d * e.vectors.transpose();
            prop_assert!((rebuilt - &a).abs().max() < 1e-9);
            let gram = e.vectors.transpose() * &e.vectors;
            prop_assert!((gram - DMatrix::<f64>::identity(6, 6)).abs().max() < 1e-10);
            for w in e.values.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }
    }
}
