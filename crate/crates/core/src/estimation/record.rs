use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::estimator::Bitstring;
use super::{EstimationError, Result};
use crate::circuits::{evaluate, CircuitSpec};
use crate::rng;
use crate::simulator::{haar_local_basis, sample_counts_dense, NoiseModel, StateVector};

/// Empirical outcome distributions of one data point over `r` shared bases.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub data_index: usize,
    pub n_qubits: usize,
    /// Seeds of the Haar-random local bases, in measurement order.
    pub bases: Vec<u64>,
    /// Bitstring → frequency, one map per basis.
    pub distributions: Vec<BTreeMap<usize, f64>>,
    /// Shots per basis; `None` for exact (infinite-shot) distributions.
    pub shots_per_basis: Option<u64>,
    pub worker_id: Option<String>,
}

impl MeasurementRecord {
    pub fn n_bases(&self) -> usize {
        self.bases.len()
    }

    /// Dense frequency vector of basis `n`.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; 1 << self.n_qubits];
        for (&k, &f) in &self.distributions[n] {
            v[k] = f;
        }
        v
    }

    pub fn with_worker(mut self, worker_id: impl Into<String>) -> Self {
        self.worker_id = Some(worker_id.into());
        self
    }
}

fn counts_to_frequencies(counts: &[u64], shots: u64) -> BTreeMap<usize, f64> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (k, c as f64 / shots as f64))
        .collect()
}

/// Prepares `circuit(θ)`, rotates it into each basis and samples `shots`
/// outcomes per basis under `noise`. Basis `n` uses shot seed
/// `derive_seed(seed, SHOTS, n)`.
pub fn collect_record(
    data_index: usize,
    circuit: &CircuitSpec,
    theta: &[f64],
    bases: &[u64],
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<MeasurementRecord> {
    let state = evaluate(circuit, theta)?;
    collect_record_from_state(data_index, &state, bases, shots, noise.depolarizing_p, seed)
}

/// `r` basis seeds derived from a master seed; every record that enters one
/// kernel must be measured in this same list.
pub fn basis_seeds(master: u64, r: usize) -> Vec<u64> {
    (0..r as u64)
        .map(|n| rng::derive_seed(master, rng::domain::BASIS_SEEDS, n))
        .collect()
}

/// Shot-sampling seed for one data point. It depends only on the master seed
/// and the data index, so the record does not depend on who measured it.
pub fn shot_seed(master: u64, data_index: usize) -> u64 {
    rng::derive_seed(master, rng::domain::SHOTS, data_index as u64)
}

/// Samples a record from an already simulated state.
pub fn collect_record_from_state(
    data_index: usize,
    state: &StateVector,
    bases: &[u64],
    shots: u64,
    p: f64,
    seed: u64,
) -> Result<MeasurementRecord> {
    if bases.is_empty() {
        return Err(EstimationError::NoBases);
    }
    let n = state.n_qubits();
    let distributions = bases
        .iter()
        .enumerate()
        .map(|(b, &basis_seed)| {
            let basis = haar_local_basis(n, basis_seed);
            let shot_seed = rng::derive_seed(seed, rng::domain::SHOTS, b as u64);
            let counts = sample_counts_dense(state, &basis, shots, p, shot_seed)?;
            Ok(counts_to_frequencies(&counts, shots))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementRecord {
        data_index,
        n_qubits: n,
        bases: bases.to_vec(),
        distributions,
        shots_per_basis: Some(shots),
        worker_id: None,
    })
}

/// Exact rotated distributions (1 − p)|⟨k|Vψ⟩|² + p/2^N for every basis.
pub fn exact_record(data_index: usize, state: &StateVector, bases: &[u64], p: f64) -> Result<MeasurementRecord> {
    if bases.is_empty() {
        return Err(EstimationError::NoBases);
    }
    let n = state.n_qubits();
    let uniform = p / (1u64 << n) as f64;
    let distributions = bases
        .iter()
        .map(|&seed| {
            let rotated = haar_local_basis(n, seed).rotate(state)?;
            Ok(rotated
                .probabilities()
                .into_iter()
                .map(|q| (1.0 - p) * q + uniform)
                .enumerate()
                .filter(|(_, q)| *q > 0.0)
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementRecord {
        data_index,
        n_qubits: n,
        bases: bases.to_vec(),
        distributions,
        shots_per_basis: None,
        worker_id: None,
    })
}

/// One line of the JSON-lines record format: one basis of one data point.
#[derive(Serialize, Deserialize)]
struct BasisLine {
    data_index: usize,
    n_qubits: usize,
    basis_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    worker_id: Option<String>,
    /// Keys are bitstrings written qubit N−1 first, so they read as binary
    /// integers with qubit 0 as the least-significant bit.
    frequencies: BTreeMap<String, f64>,
}

/// Writes records as JSON lines, one line per (record, basis).
pub fn write_jsonl<W: Write>(records: &[MeasurementRecord], mut out: W) -> Result<()> {
    for rec in records {
        for (seed, dist) in rec.bases.iter().zip(&rec.distributions) {
            let line = BasisLine {
                data_index: rec.data_index,
                n_qubits: rec.n_qubits,
                basis_seed: *seed,
                shots: rec.shots_per_basis,
                worker_id: rec.worker_id.clone(),
                frequencies: dist
                    .iter()
                    .map(|(&k, &f)| (Bitstring::new(k, rec.n_qubits).to_string(), f))
                    .collect(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Reads records written by [`write_jsonl`]; consecutive lines with the same
/// `data_index` form one record.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<MeasurementRecord>> {
    let mut records: Vec<MeasurementRecord> = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: BasisLine = serde_json::from_str(&line)?;
        let mut dist = BTreeMap::new();
        for (key, f) in parsed.frequencies {
            let b: Bitstring = key.parse()?;
            if b.len() != parsed.n_qubits {
                return Err(EstimationError::BitstringLength(b.len(), parsed.n_qubits));
            }
            dist.insert(b.value(), f);
        }
        match records.last_mut() {
            Some(rec) if rec.data_index == parsed.data_index => {
                rec.bases.push(parsed.basis_seed);
                rec.distributions.push(dist);
            }
            _ => records.push(MeasurementRecord {
                data_index: parsed.data_index,
                n_qubits: parsed.n_qubits,
                bases: vec![parsed.basis_seed],
                distributions: vec![dist],
                shots_per_basis: parsed.shots,
                worker_id: parsed.worker_id,
            }),
        }
    }
    Ok(records)
}
