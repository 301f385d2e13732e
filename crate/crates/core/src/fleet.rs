//! Distributing randomized-measurement jobs over several (simulated) quantum
//! devices and merging their records into one kernel.
//!
//! All workers measure in the same basis-seed list, which is what makes
//! cross-device kernel entries meaningful. Shot seeds are keyed by data
//! index, so a fleet with identical noise reproduces a single-device run bit
//! for bit.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{evaluate, CircuitSpec};
use crate::estimation::{
    basis_seeds, collect_record_from_state, estimate_kernel, shot_seed, EstimationError,
    KernelMatrix, MeasurementRecord,
};

#[derive(Debug, Error)]
pub enum FleetError {
    #[error("a fleet needs at least one worker")]
    NoWorkers,
    #[error("worker id {0:?} appears twice")]
    DuplicateWorker(String),
    #[error("worker {worker:?}: throughput must be positive, got {throughput}")]
    BadThroughput { worker: String, throughput: f64 },
    #[error("worker {worker:?}: depolarizing probability {p} outside [0, 1]")]
    BadNoise { worker: String, p: f64 },
    #[error("data index {0} has no parameters")]
    UnknownIndex(usize),
    #[error("plan has no executor for worker {0:?}")]
    MissingExecutor(String),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

pub type Result<T, E = FleetError> = std::result::Result<T, E>;

/// One emulated device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerSpec {
    pub worker_id: String,
    /// Global depolarizing probability of this device.
    #[serde(default)]
    pub p: f64,
    /// Circuit executions per second, for wall-time accounting.
    #[serde(default = "default_throughput")]
    pub throughput: f64,
}

fn default_throughput() -> f64 {
    5000.0
}

impl WorkerSpec {
    pub fn new(worker_id: impl Into<String>, p: f64, throughput: f64) -> Self {
        WorkerSpec {
            worker_id: worker_id.into(),
            p,
            throughput,
        }
    }
}

/// Which worker measures which data point, and the shared measurement settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobPlan {
    /// `(data_index, worker position)` in submission order.
    pub assignment: Vec<(usize, usize)>,
    pub workers: Vec<WorkerSpec>,
    /// Identical for every worker.
    pub basis_seeds: Vec<u64>,
    pub shots: u64,
    pub master_seed: u64,
}

impl JobPlan {
    pub fn worker_of(&self, data_index: usize) -> Option<&WorkerSpec> {
        self.assignment
            .iter()
            .find(|(i, _)| *i == data_index)
            .map(|&(_, w)| &self.workers[w])
    }

    pub fn jobs_for(&self, worker: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .filter(|(_, w)| *w == worker)
            .map(|&(i, _)| i)
            .collect()
    }
}

fn validate_workers(workers: &[WorkerSpec]) -> Result<()> {
    if workers.is_empty() {
        return Err(FleetError::NoWorkers);
    }
    let mut seen = BTreeSet::new();
    for w in workers {
        if !seen.insert(&w.worker_id) {
            return Err(FleetError::DuplicateWorker(w.worker_id.clone()));
        }
        if !(w.throughput > 0.0 && w.throughput.is_finite()) {
            return Err(FleetError::BadThroughput {
                worker: w.worker_id.clone(),
                throughput: w.throughput,
            });
        }
        if !(0.0..=1.0).contains(&w.p) {
            return Err(FleetError::BadNoise {
                worker: w.worker_id.clone(),
                p: w.p,
            });
        }
    }
    Ok(())
}

/// Contiguous blocks of `indices` sized proportionally to throughput
/// (largest-remainder rounding, ties to the earlier worker). Basis seeds are
/// drawn once from `seed`.
pub fn plan(indices: &[usize], workers: &[WorkerSpec], r: usize, s: u64, seed: u64) -> Result<JobPlan> {
    validate_workers(workers)?;
    let n = indices.len();
    let total: f64 = workers.iter().map(|w| w.throughput).sum();
    let quotas: Vec<f64> = workers
        .iter()
        .map(|w| n as f64 * w.throughput / total)
        .collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..workers.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - sizes.iter().sum::<usize>();
    for &w in order.iter().take(short) {
        sizes[w] += 1;
    }

    let mut assignment = Vec::with_capacity(n);
    let mut next = 0;
    for (w, &size) in sizes.iter().enumerate() {
        for &i in &indices[next..next + size] {
            assignment.push((i, w));
        }
        next += size;
    }
    Ok(JobPlan {
        assignment,
        workers: workers.to_vec(),
        basis_seeds: basis_seeds(seed, r),
        shots: s,
        master_seed: seed,
    })
}

/// A single measurement job handed to a device.
#[derive(Clone, Debug)]
pub struct Job<'a> {
    pub data_index: usize,
    pub theta: &'a [f64],
    pub bases: &'a [u64],
    pub shots: u64,
    pub shot_seed: u64,
}

/// Anything that can turn a job into a measurement record. Remote backends
/// would implement this too; only the in-process simulator exists here.
pub trait Executor: Sync {
    fn spec(&self) -> &WorkerSpec;
    fn measure(&self, job: &Job<'_>) -> Result<MeasurementRecord>;
}

/// Statevector simulation with the worker's depolarizing noise.
pub struct SimulatedExecutor<'c> {
    pub spec: WorkerSpec,
    pub circuit: &'c CircuitSpec,
}

impl Executor for SimulatedExecutor<'_> {
    fn spec(&self) -> &WorkerSpec {
        &self.spec
    }

    fn measure(&self, job: &Job<'_>) -> Result<MeasurementRecord> {
        let state = evaluate(self.circuit, job.theta).map_err(EstimationError::from)?;
        let rec = collect_record_from_state(
            job.data_index,
            &state,
            job.bases,
            job.shots,
            self.spec.p,
            job.shot_seed,
        )?;
        Ok(rec.with_worker(self.spec.worker_id.clone()))
    }
}

/// Records plus simulated timing of a fleet run.
#[derive(Clone, Debug)]
pub struct FleetRun {
    /// In plan order, independent of scheduling.
    pub records: Vec<MeasurementRecord>,
    /// Simulated busy time per worker, seconds.
    pub worker_seconds: Vec<f64>,
    /// Slowest worker's busy time.
    pub wall_seconds: f64,
    /// Sum of all busy times, i.e. the same jobs run back to back.
    pub serial_seconds: f64,
}

impl FleetRun {
    pub fn speedup(&self) -> f64 {
        if self.wall_seconds > 0.0 {
            self.serial_seconds / self.wall_seconds
        } else {
            1.0
        }
    }
}

/// Runs `plan` on simulated executors; `thetas[i]` parametrizes data index `i`.
pub fn execute(plan: &JobPlan, circuit: &CircuitSpec, thetas: &[Vec<f64>]) -> Result<FleetRun> {
    let executors: Vec<SimulatedExecutor<'_>> = plan
        .workers
        .iter()
        .map(|spec| SimulatedExecutor {
            spec: spec.clone(),
            circuit,
        })
        .collect();
    execute_with(plan, &executors, thetas)
}

/// Runs `plan` with caller-provided executors, matched to plan workers by id.
pub fn execute_with<E: Executor>(plan: &JobPlan, executors: &[E], thetas: &[Vec<f64>]) -> Result<FleetRun> {
    validate_workers(&plan.workers)?;
    let by_worker: Vec<&E> = plan
        .workers
        .iter()
        .map(|w| {
            executors
                .iter()
                .find(|e| e.spec().worker_id == w.worker_id)
                .ok_or_else(|| FleetError::MissingExecutor(w.worker_id.clone()))
        })
        .collect::<Result<_>>()?;
    if let Some(&(i, _)) = plan.assignment.iter().find(|(i, _)| *i >= thetas.len()) {
        return Err(FleetError::UnknownIndex(i));
    }

    // Each worker drains its own queue; workers run concurrently.
    let per_worker: Vec<Vec<(usize, MeasurementRecord)>> = (0..plan.workers.len())
        .into_par_iter()
        .map(|w| {
            plan.assignment
                .iter()
                .enumerate()
                .filter(|(_, (_, owner))| *owner == w)
                .map(|(pos, &(i, _))| {
                    let job = Job {
                        data_index: i,
                        theta: &thetas[i],
                        bases: &plan.basis_seeds,
                        shots: plan.shots,
                        shot_seed: shot_seed(plan.master_seed, i),
                    };
                    Ok((pos, by_worker[w].measure(&job)?))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let executions = (plan.basis_seeds.len() as u64 * plan.shots) as f64;
    let worker_seconds: Vec<f64> = per_worker
        .iter()
        .zip(&plan.workers)
        .map(|(jobs, w)| jobs.len() as f64 * executions / w.throughput)
        .collect();
    let mut slots: Vec<Option<MeasurementRecord>> = vec![None; plan.assignment.len()];
    for (pos, rec) in per_worker.into_iter().flatten() {
        slots[pos] = Some(rec);
    }
    Ok(FleetRun {
        records: slots.into_iter().map(|r| r.expect("every job ran")).collect(),
        wall_seconds: worker_seconds.iter().copied().fold(0.0, f64::max),
        serial_seconds: worker_seconds.iter().sum(),
        worker_seconds,
    })
}

/// Raw kernel from records of any mix of workers. Cross-worker pairs are
/// estimated exactly like same-worker pairs; differing basis lists are a hard
/// error. Mitigate the result with [`crate::estimation::mitigate`].
pub fn merge_and_estimate(records: &[MeasurementRecord]) -> Result<KernelMatrix> {
    if let Some(first) = records.first() {
        for (k, rec) in records.iter().enumerate().skip(1) {
            if rec.bases != first.bases {
                return Err(EstimationError::BasisMismatch { left: 0, right: k }.into());
            }
        }
    }
    Ok(estimate_kernel(records)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn workers(throughputs: &[f64]) -> Vec<WorkerSpec> {
        throughputs
            .iter()
            .enumerate()
            .map(|(k, &t)| WorkerSpec::new(format!("w{k}"), 0.0, t))
            .collect()
    }

    fn sizes(plan: &JobPlan) -> Vec<usize> {
        (0..plan.workers.len()).map(|w| plan.jobs_for(w).len()).collect()
    }

    #[test]
    fn proportional_blocks() {
        let idx: Vec<usize> = (0..10).collect();
        assert_eq!(sizes(&plan(&idx, &workers(&[1.0]), 4, 8, 0).unwrap()), vec![10]);
        assert_eq!(sizes(&plan(&idx, &workers(&[1.0, 1.0]), 4, 8, 0).unwrap()), vec![5, 5]);
        let p = plan(&idx[..9], &workers(&[2.0, 1.0]), 4, 8, 0).unwrap();
        assert_eq!(sizes(&p), vec![6, 3]);
        assert_eq!(p.jobs_for(0), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(sizes(&plan(&idx, &workers(&[1.0, 1.0, 1.0]), 4, 8, 0).unwrap()), vec![4, 3, 3]);
    }

    #[test]
    fn plan_validation() {
        assert!(matches!(plan(&[0], &[], 1, 1, 0), Err(FleetError::NoWorkers)));
        let mut ws = workers(&[1.0, 1.0]);
        ws[1].worker_id = "w0".into();
        assert!(matches!(plan(&[0], &ws, 1, 1, 0), Err(FleetError::DuplicateWorker(_))));
        assert!(matches!(
            plan(&[0], &workers(&[0.0]), 1, 1, 0),
            Err(FleetError::BadThroughput { .. })
        ));
    }

    #[test]
    fn basis_seeds_shared_and_seeded() {
        let a = plan(&[0, 1, 2], &workers(&[1.0, 1.0]), 6, 8, 42).unwrap();
        let b = plan(&[0, 1, 2], &workers(&[1.0]), 6, 8, 42).unwrap();
        assert_eq!(a.basis_seeds, b.basis_seeds);
        assert_eq!(a.basis_seeds.len(), 6);
    }
}
