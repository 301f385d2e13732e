//! Shot-budget sweeps: mitigated ΔK as a function of shots and noise, and the
//! minimal shot count reaching a target error.

use std::collections::BTreeMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimator::estimate_kernel;
use super::kernel::{delta_k, exact_kernel, KernelMatrix};
use super::mitigation::mitigate;
use super::record::{basis_seeds, collect_record_from_state, shot_seed};
use super::{EstimationError, Result};
use crate::circuits::{evaluate, CircuitSpec};
use crate::rng;
use crate::simulator::StateVector;

/// A fixed set of encoded states measured repeatedly at different (s, p).
///
/// Repeat `k` draws its bases from `derive_seed(master_seed, BASIS_SEEDS, k)`
/// and its shots from a stream that does not depend on `s` or `p`, so runs
/// with more shots extend runs with fewer shots and runs with more noise
/// depolarize a superset of shots.
pub struct SweepSetup {
    states: Vec<StateVector>,
    exact: KernelMatrix,
    pub r: usize,
    pub repeats: usize,
    pub max_exponent: u32,
    pub master_seed: u64,
    /// Refine s_min between the bracketing powers of two by integer bisection.
    pub refine: bool,
    cache: Mutex<BTreeMap<(u64, u64), f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SminRow {
    pub p: f64,
    /// `None` when the target is not reached at `2^max_exponent` shots.
    pub s_min: Option<u64>,
    pub delta_k: f64,
}

impl SweepSetup {
    pub fn new(
        circuit: &CircuitSpec,
        thetas: &[Vec<f64>],
        r: usize,
        repeats: usize,
        max_exponent: u32,
        master_seed: u64,
    ) -> Result<Self> {
        if thetas.len() < 2 {
            return Err(EstimationError::Invalid("a sweep needs at least two states".into()));
        }
        if r == 0 || repeats == 0 {
            return Err(EstimationError::Invalid("r and repeats must be positive".into()));
        }
        let states = thetas
            .iter()
            .map(|t| evaluate(circuit, t))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let exact = exact_kernel(&states)?;
        Ok(SweepSetup {
            states,
            exact,
            r,
            repeats,
            max_exponent,
            master_seed,
            refine: true,
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn exact(&self) -> &KernelMatrix {
        &self.exact
    }

    pub fn n_qubits(&self) -> usize {
        self.states[0].n_qubits()
    }

    /// Mitigated kernel of repeat `k` at (s, p). Mitigation failures surface as errors.
    pub fn mitigated_kernel(&self, shots: u64, p: f64, k: usize) -> Result<KernelMatrix> {
        let repeat_seed = rng::derive_seed(self.master_seed, rng::domain::BASIS_SEEDS, k as u64);
        let bases = basis_seeds(repeat_seed, self.r);
        let records = self
            .states
            .iter()
            .enumerate()
            .map(|(i, state)| {
                collect_record_from_state(i, state, &bases, shots, p, shot_seed(repeat_seed, i))
            })
            .collect::<Result<Vec<_>>>()?;
        let raw = estimate_kernel(&records)?;
        mitigate(&raw, self.n_qubits())
    }

    /// ΔK of repeat `k`; an unrecoverable mitigation counts as infinite error.
    pub fn delta_k_once(&self, shots: u64, p: f64, k: usize) -> Result<f64> {
        match self.mitigated_kernel(shots, p, k) {
            Ok(m) => delta_k(&m, &self.exact),
            Err(EstimationError::Unrecoverable { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// ΔK averaged over all repeats.
    pub fn mean_delta_k(&self, shots: u64, p: f64) -> Result<f64> {
        let key = (shots, p.to_bits());
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let values = (0..self.repeats)
            .into_par_iter()
            .map(|k| self.delta_k_once(shots, p, k))
            .collect::<Result<Vec<_>>>()?;
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        self.cache.lock().expect("cache lock").insert(key, mean);
        Ok(mean)
    }

    /// Smallest `s ≤ 2^max_exponent` with mean ΔK below `target`: bisection on
    /// the exponent brackets it between two powers of two, then (with
    /// `refine`) bisection on the integers in that bracket pins it down.
    pub fn s_min(&self, p: f64, target: f64) -> Result<SminRow> {
        let top = 1u64 << self.max_exponent;
        let at_top = self.mean_delta_k(top, p)?;
        if at_top >= target {
            return Ok(SminRow {
                p,
                s_min: None,
                delta_k: at_top,
            });
        }
        // invariant: ΔK(2^hi) < target; ΔK(2^lo) ≥ target unless lo == 0
        let (mut lo, mut hi) = (0u32, self.max_exponent);
        if self.mean_delta_k(2, p)? < target {
            hi = 1;
        } else {
            lo = 1;
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.mean_delta_k(1u64 << mid, p)? < target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut s = 1u64 << hi;
        if self.refine && hi > 1 {
            // ΔK(s_lo) ≥ target > ΔK(s)
            let mut s_lo = 1u64 << (hi - 1);
            while s - s_lo > 1 {
                let mid = s_lo + (s - s_lo) / 2;
                if self.mean_delta_k(mid, p)? < target {
                    s = mid;
                } else {
                    s_lo = mid;
                }
            }
        }
        Ok(SminRow {
            p,
            s_min: Some(s),
            delta_k: self.mean_delta_k(s, p)?,
        })
    }
}

/// s_min for every noise level in `p_values`.
pub fn s_min_sweep(setup: &SweepSetup, p_values: &[f64], target: f64) -> Result<Vec<SminRow>> {
    if !(target > 0.0 && target < 1.0) {
        return Err(EstimationError::Invalid(format!("target {target} must lie in (0, 1)")));
    }
    p_values.iter().map(|&p| setup.s_min(p, target)).collect()
}

/// Least-squares slope and intercept of ln s_min against ln(1 − p), over rows
/// that reached the target.
pub fn fit_power_law(rows: &[SminRow]) -> Option<(f64, f64)> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|row| row.s_min.map(|s| ((1.0 - row.p).ln(), (s as f64).ln())))
        .filter(|(x, _)| x.is_finite())
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_fit_recovers_exponent() {
        let rows: Vec<SminRow> = [0.0, 0.2, 0.4, 0.6]
            .iter()
            .map(|&p| SminRow {
                p,
                s_min: Some((100.0 * (1.0f64 - p).powi(-2)).round() as u64),
                delta_k: 0.05,
            })
            .collect();
        let (slope, _) = fit_power_law(&rows).unwrap();
        assert!((slope + 2.0).abs() < 0.01, "slope {slope}");
    }

    #[test]
    fn fit_skips_saturated_rows() {
        let rows = vec![
            SminRow { p: 0.0, s_min: Some(64), delta_k: 0.0 },
            SminRow { p: 0.5, s_min: None, delta_k: 1.0 },
        ];
        assert!(fit_power_law(&rows).is_none());
    }
}
