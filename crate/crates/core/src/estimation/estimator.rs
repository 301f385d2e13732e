//! Randomized-measurement overlap estimator.
//!
//! For two records sharing `r` local bases,
//!
//! ```text
//! K_b(i, j) = (2^N / r) Σ_n Σ_{k,q} (−2)^{−D(k,q)} P_i^(n)(k) P_j^(n)(q)
//! ```
//!
//! where `D` is the Hamming distance. The Hamming weight factorizes over bits
//! as ⊗[[1, −½], [−½, 1]], so the inner sum is `⟨P_i, T P_j⟩` with `T` applied
//! by a butterfly pass in O(N·2^N).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::kernel::{KernelKind, KernelMatrix, KernelMetadata};
use super::record::MeasurementRecord;
use super::{EstimationError, Result};

/// An `n_bits`-bit computational basis label; bit `q` is qubit `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring {
    value: usize,
    n_bits: usize,
}

impl Bitstring {
    pub fn new(value: usize, n_bits: usize) -> Self {
        debug_assert!(n_bits >= usize::BITS as usize || value >> n_bits == 0);
        Bitstring { value, n_bits }
    }

    pub fn value(&self) -> usize {
        self.value
    }

    pub fn len(&self) -> usize {
        self.n_bits
    }

    pub fn is_empty(&self) -> bool {
        self.n_bits == 0
    }
}

/// Written with qubit N−1 first, i.e. as a binary integer.
impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.n_bits).rev() {
            f.write_str(if self.value >> q & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bitstring {
    type Err = EstimationError;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s.len() >= usize::BITS as usize || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(EstimationError::BadBitstring(s.to_string()));
        }
        let value = usize::from_str_radix(s, 2).map_err(|_| EstimationError::BadBitstring(s.to_string()))?;
        Ok(Bitstring::new(value, s.len()))
    }
}

#[inline]
fn weight_of_distance(d: u32) -> f64 {
    (-0.5f64).powi(d as i32)
}

/// (−2)^(−D(k, q)).
pub fn hamming_weight(k: Bitstring, q: Bitstring) -> Result<f64> {
    if k.n_bits != q.n_bits {
        return Err(EstimationError::BitstringLength(k.n_bits, q.n_bits));
    }
    Ok(weight_of_distance((k.value ^ q.value).count_ones()))
}

/// In-place `v ← (⊗[[1, −½], [−½, 1]]) v`. `v.len()` must be a power of two.
pub fn hamming_transform(v: &mut [f64]) {
    assert!(v.len().is_power_of_two(), "transform length must be a power of two");
    let mut half = 1;
    while half < v.len() {
        for block in v.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x - 0.5 * y;
                *b = y - 0.5 * x;
            }
        }
        half *= 2;
    }
}

fn check_compatible(a: &MeasurementRecord, b: &MeasurementRecord) -> Result<()> {
    if a.n_qubits != b.n_qubits {
        return Err(EstimationError::QubitMismatch {
            left: a.n_qubits,
            right: b.n_qubits,
        });
    }
    if a.bases.is_empty() {
        return Err(EstimationError::NoBases);
    }
    if a.bases != b.bases || a.distributions.len() != a.bases.len() || b.distributions.len() != b.bases.len() {
        return Err(EstimationError::BasisMismatch {
            left: a.data_index,
            right: b.data_index,
        });
    }
    Ok(())
}

/// Double sum over observed outcomes of both records.
pub fn estimate_entry_naive(a: &MeasurementRecord, b: &MeasurementRecord) -> Result<f64> {
    check_compatible(a, b)?;
    let mut total = 0.0;
    for (pa, pb) in a.distributions.iter().zip(&b.distributions) {
        for (&k, &fk) in pa {
            for (&q, &fq) in pb {
                total += weight_of_distance((k ^ q).count_ones()) * fk * fq;
            }
        }
    }
    Ok(total * (1u64 << a.n_qubits) as f64 / a.n_bases() as f64)
}

/// Butterfly-transform route, O(r·N·2^N).
pub fn estimate_entry_fast(a: &MeasurementRecord, b: &MeasurementRecord) -> Result<f64> {
    check_compatible(a, b)?;
    let mut total = 0.0;
    for n in 0..a.n_bases() {
        let mut tb = b.dense(n);
        hamming_transform(&mut tb);
        total += a.distributions[n].iter().map(|(&k, &f)| f * tb[k]).sum::<f64>();
    }
    Ok(total * (1u64 << a.n_qubits) as f64 / a.n_bases() as f64)
}

/// Off-diagonal overlap estimate Tr(ρ_i ρ_j).
///
/// Computed by both routes; an error is returned if they differ by more than
/// 1e-9.
pub fn estimate_entry(a: &MeasurementRecord, b: &MeasurementRecord) -> Result<f64> {
    let fast = estimate_entry_fast(a, b)?;
    let naive = estimate_entry_naive(a, b)?;
    if (fast - naive).abs() > 1e-9 {
        return Err(EstimationError::RouteDisagreement { fast, naive });
    }
    Ok(fast)
}

/// Purity Tr(ρ²) of one record, averaged uniformly over its bases.
///
/// With `s` shots the same-basis second moment uses distinct shot pairs only:
/// `Σ_{k,q} w(k,q) (n_k n_q − δ_kq n_k) / (s(s−1))`, which in frequencies is
/// `(s⟨f, T f⟩ − 1) / (s − 1)`. Exact records use `⟨P, T P⟩` directly.
pub fn estimate_purity(rec: &MeasurementRecord) -> Result<f64> {
    if rec.bases.is_empty() {
        return Err(EstimationError::NoBases);
    }
    let dim = (1u64 << rec.n_qubits) as f64;
    let mut total = 0.0;
    for n in 0..rec.n_bases() {
        let p = rec.dense(n);
        let mut tp = p.clone();
        hamming_transform(&mut tp);
        let second: f64 = p.iter().zip(&tp).map(|(a, b)| a * b).sum();
        total += match rec.shots_per_basis {
            None => second,
            Some(s) if s >= 2 => {
                let s = s as f64;
                (s * second - 1.0) / (s - 1.0)
            }
            Some(s) => return Err(EstimationError::TooFewShots(s)),
        };
    }
    Ok(dim * total / rec.n_bases() as f64)
}

/// Raw kernel matrix from a set of records sharing one basis list.
///
/// Off-diagonal entries are `⟨P_i, T P_j⟩` averaged over bases, evaluated for
/// all pairs at once as one matrix product; the diagonal holds the
/// collision-corrected purities, which are also stored in `purities`.
pub fn estimate_kernel(records: &[MeasurementRecord]) -> Result<KernelMatrix> {
    let first = records
        .first()
        .ok_or_else(|| EstimationError::Invalid("no records to estimate".into()))?;
    for rec in &records[1..] {
        check_compatible(first, rec)?;
    }
    let l = records.len();
    let n_qubits = first.n_qubits;
    let dim = 1usize << n_qubits;
    let r = first.n_bases();
    let width = dim * r;

    // Row i of `plain` is [P_i^(1) … P_i^(r)], of `transformed` the same with T applied.
    let rows: Vec<(Vec<f64>, Vec<f64>)> = records
        .par_iter()
        .map(|rec| {
            let mut plain = Vec::with_capacity(width);
            let mut transformed = Vec::with_capacity(width);
            for n in 0..r {
                let p = rec.dense(n);
                let mut tp = p.clone();
                hamming_transform(&mut tp);
                plain.extend_from_slice(&p);
                transformed.extend_from_slice(&tp);
            }
            (plain, transformed)
        })
        .collect();
    let plain = DMatrix::from_fn(l, width, |i, c| rows[i].0[c]);
    let transformed = DMatrix::from_fn(l, width, |i, c| rows[i].1[c]);
    drop(rows);

    let scale = dim as f64 / r as f64;
    let product = &plain * transformed.transpose();
    let mut values = (&product + product.transpose()) * (0.5 * scale);
    let purities = records.par_iter().map(estimate_purity).collect::<Result<Vec<_>>>()?;
    for (i, &p) in purities.iter().enumerate() {
        values[(i, i)] = p;
    }
    let shots = first.shots_per_basis;
    Ok(KernelMatrix {
        values,
        kind: KernelKind::RawEstimate,
        purities: Some(purities),
        metadata: KernelMetadata {
            basis_seeds: first.bases.clone(),
            r: Some(r),
            s: shots,
            data_indices: records.iter().map(|rec| rec.data_index).collect(),
            workers: records.iter().map(|rec| rec.worker_id.clone()).collect(),
            ..KernelMetadata::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::record::exact_record;
    use crate::simulator::StateVector;
    use num_complex::Complex64;
    use std::collections::BTreeMap;

    fn record(n_qubits: usize, dists: Vec<BTreeMap<usize, f64>>, bases: Vec<u64>) -> MeasurementRecord {
        MeasurementRecord {
            data_index: 0,
            n_qubits,
            bases,
            distributions: dists,
            shots_per_basis: None,
            worker_id: None,
        }
    }

    fn uniform(n: usize) -> BTreeMap<usize, f64> {
        (0..1 << n).map(|k| (k, 1.0 / (1 << n) as f64)).collect()
    }

    #[test]
    fn weights() {
        let b = |s: &str| s.parse::<Bitstring>().unwrap();
        assert_eq!(hamming_weight(b("0110"), b("0110")).unwrap(), 1.0);
        assert_eq!(hamming_weight(b("0110"), b("0111")).unwrap(), -0.5);
        assert_eq!(hamming_weight(b("0110"), b("1111")).unwrap(), 0.25);
        assert!(hamming_weight(b("01"), b("011")).is_err());
        assert!("01x".parse::<Bitstring>().is_err());
        assert_eq!(b("0110").to_string(), "0110");
        assert_eq!(b("0110").value(), 6);
    }

    #[test]
    fn uniform_distributions_give_inverse_dimension() {
        for n in 1..=5 {
            let a = record(n, vec![uniform(n)], vec![1]);
            let k = estimate_entry(&a, &a.clone()).unwrap();
            assert!((k - 1.0 / (1 << n) as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn basis_mismatch_rejected() {
        let a = record(2, vec![uniform(2)], vec![1]);
        let b = record(2, vec![uniform(2)], vec![2]);
        assert!(matches!(estimate_entry(&a, &b), Err(EstimationError::BasisMismatch { .. })));
        let c = record(3, vec![uniform(3)], vec![1]);
        assert!(matches!(estimate_entry(&a, &c), Err(EstimationError::QubitMismatch { .. })));
    }

    #[test]
    fn orthogonal_single_qubit_states() {
        let zero = StateVector::zero(1).unwrap();
        let one = StateVector::from_amplitudes(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        let bases: Vec<u64> = (0..20_000).collect();
        let a = exact_record(0, &zero, &bases, 0.0).unwrap();
        let b = exact_record(1, &one, &bases, 0.0).unwrap();
        let k = estimate_entry_fast(&a, &b).unwrap();
        // single-qubit per-basis standard deviation is at most ~0.5
        assert!(k.abs() < 4.0 * 0.5 / (bases.len() as f64).sqrt(), "k = {k}");
    }

    #[test]
    fn purity_too_few_shots() {
        let mut a = record(1, vec![uniform(1)], vec![1]);
        a.shots_per_basis = Some(1);
        assert!(matches!(estimate_purity(&a), Err(EstimationError::TooFewShots(1))));
    }

    #[test]
    fn transform_matches_kron() {
        // T for 2 bits, explicit
        let w = [[1.0, -0.5, -0.5, 0.25], [-0.5, 1.0, 0.25, -0.5], [-0.5, 0.25, 1.0, -0.5], [0.25, -0.5, -0.5, 1.0]];
        let v = [0.1, 0.2, 0.3, 0.4];
        let mut t = v;
        hamming_transform(&mut t);
        for i in 0..4 {
            let expect: f64 = (0..4).map(|j| w[i][j] * v[j]).sum();
            assert!((t[i] - expect).abs() < 1e-15);
        }
    }
}
