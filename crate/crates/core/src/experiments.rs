//! Experiment runners behind the command-line subcommands. Each returns its
//! results as plain data and, given an output directory, writes plot-ready
//! CSV plus a `metadata.json` sufficient to reproduce the run.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuits::{
    evaluate, npqc_reference_params, qfim, rank_bound, rbf_reference, weighted_distance,
    CircuitError, CircuitSpec, EncodingSpec,
};
use crate::config::{ClassifyKernel, ConfigError, RunConfig, SweepStates, ThetaPolicy};
use crate::datapipe::{bundled_digits, load_digits_csv, split, DataError, Dataset, Pipeline};
use crate::estimation::{
    basis_seeds, budget, collect_record_from_state, estimate_kernel, exact_kernel, fit_power_law,
    mitigate_with, prepare_for_svm, rbf_kernel, shot_seed, BudgetReport, EstimationError,
    KernelMatrix, MeasurementRecord, SminRow, Strategy, SweepSetup,
};
use crate::fleet::{self, FleetError};
use crate::learner::{accuracy, confusion, train_ovr, LearnerError, SmoParams};
use crate::rng::{derive_seed, domain, stream};
use crate::simulator::{SimError, StateVector};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Fleet(#[from] FleetError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

/// Everything needed to rerun a command bit-exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub command: String,
    pub crate_version: String,
    pub config: RunConfig,
    /// SHA-256 over git-style blobs of every input (config text, dataset).
    pub content_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
}

/// Hashes `inputs` as a sequence of `blob <len>\0<bytes>` records.
pub fn content_hash(inputs: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for bytes in inputs {
        h.update(format!("blob {}\0", bytes.len()).as_bytes());
        h.update(bytes);
    }
    hex::encode(h.finalize())
}

fn write_metadata(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    extra_inputs: &[&[u8]],
    seeds: BTreeMap<String, u64>,
    outputs: &[&str],
) -> Result<()> {
    let toml = cfg.to_toml();
    let mut inputs: Vec<&[u8]> = vec![toml.as_bytes()];
    inputs.extend_from_slice(extra_inputs);
    let meta = RunMetadata {
        command: command.to_string(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        content_hash: content_hash(&inputs),
        seeds,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    fs::write(out.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// θ_r according to the configured policy.
pub fn reference_params(cfg: &RunConfig, circuit: &CircuitSpec) -> Result<Vec<f64>> {
    Ok(match cfg.encoding.theta_r {
        ThetaPolicy::NpqcReference => npqc_reference_params(circuit)?,
        ThetaPolicy::Random => {
            let mut rng = stream(cfg.experiment.seed, domain::REFERENCE, 0);
            (0..circuit.n_params())
                .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
                .collect()
        }
    })
}

/// Circuit, encoding and the feature block of the QFIM at θ_r.
pub struct EncodedCircuit {
    pub circuit: CircuitSpec,
    pub encoding: EncodingSpec,
    pub qfim_block: DMatrix<f64>,
}

impl EncodedCircuit {
    pub fn from_config(cfg: &RunConfig, default_dim: usize) -> Result<Self> {
        let circuit = cfg.circuit.build()?;
        let theta_r = reference_params(cfg, &circuit)?;
        let dim = cfg.encoding.feature_dim.unwrap_or(default_dim.min(circuit.n_params()));
        let spectrum = qfim(&circuit, &theta_r)?;
        let qfim_block = spectrum.feature_block(dim);
        let encoding = EncodingSpec::new(theta_r, cfg.encoding.c, dim)?;
        Ok(EncodedCircuit {
            circuit,
            encoding,
            qfim_block,
        })
    }

    pub fn states(&self, features: &[Vec<f64>]) -> Result<Vec<StateVector>> {
        features
            .iter()
            .map(|x| Ok(evaluate(&self.circuit, &self.encoding.encode(x)?)?))
            .collect()
    }

    pub fn thetas(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(features
            .iter()
            .map(|x| self.encoding.encode(x))
            .collect::<std::result::Result<_, _>>()?)
    }
}

/// Randomized-measurement records of `states`, either at a single noise
/// level `p` or, when `fleet` is non-empty, spread over the fleet's workers.
pub fn measure(
    cfg: &RunConfig,
    enc: &EncodedCircuit,
    features: &[Vec<f64>],
    states: &[StateVector],
    p: f64,
    use_fleet: bool,
    master: u64,
) -> Result<Vec<MeasurementRecord>> {
    let m = &cfg.measurement;
    if use_fleet && !m.fleet.is_empty() {
        let indices: Vec<usize> = (0..states.len()).collect();
        let plan = fleet::plan(&indices, &m.fleet, m.r, m.s, master)?;
        let thetas = enc.thetas(features)?;
        return Ok(fleet::execute(&plan, &enc.circuit, &thetas)?.records);
    }
    let bases = basis_seeds(master, m.r);
    states
        .iter()
        .enumerate()
        .map(|(i, st)| Ok(collect_record_from_state(i, st, &bases, m.s, p, shot_seed(master, i))?))
        .collect()
}

fn gaussian_features(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let sd = (1.0 / (dim as f64).sqrt()).sqrt();
    let normal = Normal::new(0.0, sd).expect("positive sd");
    (0..n)
        .map(|_| (0..dim).map(|_| normal.sample(rng)).collect())
        .collect()
}

// ---------------------------------------------------------------- kernel

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelRow {
    pub pair: usize,
    pub d_f: f64,
    pub exact: f64,
    pub estimated: f64,
    /// NaN when mitigation was impossible (state fully depolarized).
    pub mitigated: f64,
    pub rbf: f64,
}

/// Kernel versus QFIM-weighted distance over random standardized pairs.
///
/// Pair `k` is `(x_a, x_a + t (x_b − x_a))` with `x_a`, `x_b` Gaussian of
/// variance `1/√dim` and `t ~ U(0, pair_spread)`.
pub fn cmd_kernel(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<KernelRow>> {
    cfg.validate()?;
    let enc = EncodedCircuit::from_config(cfg, usize::MAX)?;
    let dim = enc.encoding.feature_dim;
    let x = &cfg.experiment;
    let mut rng = stream(x.seed, domain::FEATURES, 0);
    let mut features = Vec::with_capacity(2 * x.n_pairs);
    for _ in 0..x.n_pairs {
        let ends = gaussian_features(&mut rng, 2, dim);
        let t: f64 = rng.random::<f64>() * x.pair_spread;
        let b: Vec<f64> = ends[0].iter().zip(&ends[1]).map(|(a, b)| a + t * (b - a)).collect();
        features.push(ends[0].clone());
        features.push(b);
    }
    let states = enc.states(&features)?;
    let exact = exact_kernel(&states)?;
    let master = derive_seed(x.seed, domain::BASIS_SEEDS, 0);
    let records = measure(cfg, &enc, &features, &states, cfg.measurement.p, true, master)?;
    let raw = estimate_kernel(&records)?;
    let n_qubits = enc.circuit.n_qubits();
    let mitigated = match mitigate_with(&raw, n_qubits, cfg.measurement.mitigation) {
        Ok(m) => Some(m),
        Err(EstimationError::Unrecoverable { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let c = cfg.encoding.c;
    let rows = (0..x.n_pairs)
        .map(|k| {
            let (a, b) = (2 * k, 2 * k + 1);
            Ok(KernelRow {
                pair: k,
                d_f: weighted_distance(&features[a], &features[b], &enc.qfim_block)? * c * c,
                exact: exact.get(a, b),
                estimated: raw.get(a, b),
                mitigated: mitigated.as_ref().map_or(f64::NAN, |m| m.get(a, b)),
                rbf: rbf_reference(&features[a], &features[b], &enc.qfim_block, c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(out) = out {
        fs::create_dir_all(out)?;
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.pair.to_string(),
                    r.d_f.to_string(),
                    r.exact.to_string(),
                    r.estimated.to_string(),
                    r.mitigated.to_string(),
                    r.rbf.to_string(),
                ]
            })
            .collect();
        write_csv(
            &out.join("kernel.csv"),
            &["pair", "d_f", "exact", "estimated", "mitigated", "rbf"],
            &table,
        )?;
        let seeds = BTreeMap::from([
            ("experiment".to_string(), x.seed),
            ("bases".to_string(), master),
        ]);
        write_metadata(out, "kernel", cfg, &[], seeds, &["kernel.csv"])?;
    }
    Ok(rows)
}

// ----------------------------------------------------------------- sweep

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    /// `(s, p, mean ΔK)` for s = 2^1 … 2^max_exponent.
    pub grid: Vec<(u64, f64, f64)>,
    pub s_min: Vec<SminRow>,
    /// `(slope, intercept)` of ln s_min against ln(1 − p).
    pub fit: Option<(f64, f64)>,
}

/// The states measured by the sweep, per the configured policy.
pub fn sweep_thetas(cfg: &RunConfig, circuit: &CircuitSpec) -> Result<Vec<Vec<f64>>> {
    let x = &cfg.experiment;
    let mut rng = stream(x.seed, domain::FEATURES, 1);
    Ok(match x.sweep_states {
        SweepStates::Random => (0..x.n_states)
            .map(|_| {
                (0..circuit.n_params())
                    .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
                    .collect()
            })
            .collect(),
        SweepStates::Encoded => {
            let theta_r = reference_params(cfg, circuit)?;
            let enc = EncodingSpec::new(theta_r, cfg.encoding.c, circuit.n_params())?;
            gaussian_features(&mut rng, x.n_states, circuit.n_params())
                .iter()
                .map(|f| enc.encode(f))
                .collect::<std::result::Result<_, _>>()?
        }
    })
}

/// Mean mitigated ΔK over an `(s, p)` grid and the minimal shot count per p.
/// `with_grid = false` skips the full grid and only searches s_min.
pub fn cmd_sweep(cfg: &RunConfig, with_grid: bool, out: Option<&Path>) -> Result<SweepReport> {
    cfg.validate()?;
    let x = &cfg.experiment;
    let circuit = cfg.circuit.build()?;
    let thetas = sweep_thetas(cfg, &circuit)?;
    let mut setup = SweepSetup::new(
        &circuit,
        &thetas,
        cfg.measurement.r,
        x.repeats,
        x.max_exponent,
        x.seed,
    )?;
    setup.refine = x.refine_s_min;
    let mut grid = Vec::new();
    if with_grid {
        for &p in &x.p_values {
            for e in 1..=x.max_exponent {
                let s = 1u64 << e;
                grid.push((s, p, setup.mean_delta_k(s, p)?));
            }
        }
    }
    let s_min = crate::estimation::s_min_sweep(&setup, &x.p_values, x.target)?;
    let fit = fit_power_law(&s_min);
    let report = SweepReport { grid, s_min, fit };

    if let Some(out) = out {
        fs::create_dir_all(out)?;
        let g: Vec<Vec<String>> = report
            .grid
            .iter()
            .map(|(s, p, dk)| vec![s.to_string(), p.to_string(), dk.to_string()])
            .collect();
        write_csv(&out.join("sweep_grid.csv"), &["s", "p", "delta_k"], &g)?;
        let t: Vec<Vec<String>> = report
            .s_min
            .iter()
            .map(|r| {
                vec![
                    r.p.to_string(),
                    r.s_min.map_or(String::new(), |s| s.to_string()),
                    r.delta_k.to_string(),
                    r.s_min.is_none().to_string(),
                ]
            })
            .collect();
        write_csv(&out.join("s_min.csv"), &["p", "s_min", "delta_k", "saturated"], &t)?;
        let fit_json = serde_json::json!({
            "model": "ln s_min = slope * ln(1 - p) + intercept",
            "slope": report.fit.map(|f| f.0),
            "intercept": report.fit.map(|f| f.1),
            "target": x.target,
        });
        fs::write(out.join("fit.json"), serde_json::to_string_pretty(&fit_json)?)?;
        let seeds = BTreeMap::from([("experiment".to_string(), x.seed)]);
        write_metadata(out, "sweep", cfg, &[], seeds, &["sweep_grid.csv", "s_min.csv", "fit.json"])?;
    }
    Ok(report)
}

// -------------------------------------------------------------- classify

/// Accuracy of one kernel kind at one training size, over all seeds.
#[derive(Clone, Debug, Serialize)]
pub struct AccuracyRow {
    pub kernel: ClassifyKernel,
    pub l_train: usize,
    pub test_accuracy: Vec<f64>,
    pub train_accuracy: Vec<f64>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

impl AccuracyRow {
    pub fn test_mean_std(&self) -> (f64, f64) {
        mean_std(&self.test_accuracy)
    }

    pub fn train_mean_std(&self) -> (f64, f64) {
        mean_std(&self.train_accuracy)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyReport {
    pub rows: Vec<AccuracyRow>,
    /// Test confusion matrices at the largest training size, summed over seeds.
    pub confusion: BTreeMap<ClassifyKernel, Vec<Vec<u64>>>,
    /// Every training kernel passed the SVM's KKT check, max violation seen.
    pub max_kkt_violation: f64,
}

impl ClassifyReport {
    pub fn row(&self, kernel: ClassifyKernel, l_train: usize) -> Option<&AccuracyRow> {
        self.rows
            .iter()
            .find(|r| r.kernel == kernel && r.l_train == l_train)
    }
}

pub fn load_dataset(cfg: &RunConfig) -> Result<(Dataset, Vec<u8>)> {
    Ok(match &cfg.io.dataset {
        Some(path) => (load_digits_csv(path)?, fs::read(path)?),
        None => (bundled_digits()?, include_bytes!("../data/digits.csv").to_vec()),
    })
}

struct SplitKernels {
    /// train+test kernel for each requested kind; train rows first.
    kernels: BTreeMap<ClassifyKernel, DMatrix<f64>>,
}

fn classify_kernels(
    cfg: &RunConfig,
    enc: &EncodedCircuit,
    features: &[Vec<f64>],
    master: u64,
) -> Result<SplitKernels> {
    let kinds = &cfg.experiment.kernels;
    let needs_states = kinds.iter().any(|k| *k != ClassifyKernel::Rbf);
    let states = if needs_states {
        enc.states(features)?
    } else {
        Vec::new()
    };
    let n_qubits = enc.circuit.n_qubits();
    let mut kernels = BTreeMap::new();
    let mut noisy_raw: Option<KernelMatrix> = None;
    for &kind in kinds {
        let k = match kind {
            ClassifyKernel::Rbf => rbf_kernel(features, &enc.qfim_block, cfg.encoding.c)?.values,
            ClassifyKernel::Exact => exact_kernel(&states)?.values,
            ClassifyKernel::Estimated => {
                let recs = measure(cfg, enc, features, &states, 0.0, false, master)?;
                estimate_kernel(&recs)?.values
            }
            ClassifyKernel::Mitigated | ClassifyKernel::Unmitigated => {
                if noisy_raw.is_none() {
                    let noisy_master = derive_seed(master, domain::SHOTS, 1);
                    let recs = measure(
                        cfg,
                        enc,
                        features,
                        &states,
                        cfg.measurement.p,
                        true,
                        noisy_master,
                    )?;
                    noisy_raw = Some(estimate_kernel(&recs)?);
                }
                let raw = noisy_raw.as_ref().expect("just measured");
                if kind == ClassifyKernel::Mitigated {
                    mitigate_with(raw, n_qubits, cfg.measurement.mitigation)?.values
                } else {
                    raw.values.clone()
                }
            }
        };
        kernels.insert(kind, k);
    }
    Ok(SplitKernels { kernels })
}

/// Trains and evaluates one-vs-rest SVMs on a `(L_train + n_test)` kernel.
/// Estimated kernels have their training block made SVM-ready (unit
/// diagonal, optional PSD projection); test rows are used as measured.
pub fn evaluate_kernel(
    cfg: &RunConfig,
    kind: ClassifyKernel,
    full: &DMatrix<f64>,
    train_labels: &[usize],
    test_labels: &[usize],
) -> Result<(f64, f64, Vec<usize>, f64)> {
    let l = train_labels.len();
    let t = test_labels.len();
    let mut k_train = full.view((0, 0), (l, l)).into_owned();
    if !matches!(kind, ClassifyKernel::Rbf | ClassifyKernel::Exact) {
        let km = KernelMatrix::new(k_train, crate::estimation::KernelKind::RawEstimate);
        k_train = prepare_for_svm(&km, cfg.measurement.clip_negative).values;
    }
    let k_test = full.view((l, 0), (t, l)).into_owned();
    let params = SmoParams::new(cfg.svm.c);
    let clf = train_ovr(&k_train, train_labels, &params)?;
    let kkt = clf
        .models
        .iter()
        .map(|m| crate::learner::kkt_violation(m, &k_train))
        .fold(0.0, f64::max);
    let train_pred = clf.predict_rows(&k_train)?;
    let test_pred = clf.predict_rows(&k_test)?;
    Ok((
        accuracy(&test_pred, test_labels)?,
        accuracy(&train_pred, train_labels)?,
        test_pred,
        kkt,
    ))
}

/// Test and training accuracy versus training-set size for every configured
/// kernel kind, averaged over `repeats` random splits.
pub fn cmd_classify(cfg: &RunConfig, out: Option<&Path>) -> Result<ClassifyReport> {
    cfg.validate()?;
    let x = &cfg.experiment;
    let (data, data_bytes) = load_dataset(cfg)?;
    let pca_dim = cfg.svm.pca_m.unwrap_or(data.n_features());
    let enc = EncodedCircuit::from_config(cfg, pca_dim)?;
    if enc.encoding.feature_dim != pca_dim {
        return Err(ExperimentError::Invalid(format!(
            "encoding.feature_dim = {} but the pipeline produces {pca_dim} features",
            enc.encoding.feature_dim
        )));
    }
    let n_classes = data.labels.iter().max().map_or(0, |&m| m + 1);
    let largest = x.training_sizes.iter().copied().max().unwrap_or(0);
    if largest + x.n_test > data.len() {
        return Err(ExperimentError::Invalid(format!(
            "training size {largest} plus n_test {} exceeds the {} available rows",
            x.n_test,
            data.len()
        )));
    }

    let mut acc: BTreeMap<(ClassifyKernel, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut confusions: BTreeMap<ClassifyKernel, Vec<Vec<u64>>> = BTreeMap::new();
    let mut max_kkt: f64 = 0.0;
    let mut seeds = BTreeMap::from([("experiment".to_string(), x.seed)]);
    for rep in 0..x.repeats {
        let split_seed = derive_seed(x.seed, domain::SPLIT, rep as u64);
        let basis_master = derive_seed(x.seed, domain::BASIS_SEEDS, rep as u64);
        seeds.insert(format!("split_{rep}"), split_seed);
        seeds.insert(format!("bases_{rep}"), basis_master);
        let (train_all, test) = split(&data, x.n_test, split_seed)?;
        for &l_train in &x.training_sizes {
            let idx: Vec<usize> = (0..l_train).collect();
            let train = train_all.subset(&idx);
            let pipe = Pipeline::fit(&train, cfg.svm.pca_m, cfg.svm.pipeline_order)?;
            let mut features = pipe.apply(&train)?.rows();
            features.extend(pipe.apply(&test)?.rows());
            let master = derive_seed(basis_master, domain::BASIS_SEEDS, l_train as u64);
            let ks = classify_kernels(cfg, &enc, &features, master)?;
            for (&kind, full) in &ks.kernels {
                let (test_acc, train_acc, pred, kkt) =
                    evaluate_kernel(cfg, kind, full, &train.labels, &test.labels)?;
                max_kkt = max_kkt.max(kkt);
                let entry = acc.entry((kind, l_train)).or_default();
                entry.0.push(test_acc);
                entry.1.push(train_acc);
                if l_train == largest {
                    let c = confusion(&pred, &test.labels, n_classes)?;
                    let total = confusions
                        .entry(kind)
                        .or_insert_with(|| vec![vec![0; n_classes]; n_classes]);
                    for (row, add) in total.iter_mut().zip(c) {
                        for (v, a) in row.iter_mut().zip(add) {
                            *v += a;
                        }
                    }
                }
            }
        }
    }
    let rows: Vec<AccuracyRow> = acc
        .into_iter()
        .map(|((kernel, l_train), (test_accuracy, train_accuracy))| AccuracyRow {
            kernel,
            l_train,
            test_accuracy,
            train_accuracy,
        })
        .collect();
    let report = ClassifyReport {
        rows,
        confusion: confusions,
        max_kkt_violation: max_kkt,
    };

    if let Some(out) = out {
        fs::create_dir_all(out)?;
        let table: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                let (m, s) = r.test_mean_std();
                let (tm, ts) = r.train_mean_std();
                vec![
                    r.kernel.name().to_string(),
                    r.l_train.to_string(),
                    m.to_string(),
                    s.to_string(),
                    tm.to_string(),
                    ts.to_string(),
                    r.test_accuracy.len().to_string(),
                ]
            })
            .collect();
        write_csv(
            &out.join("accuracy.csv"),
            &["kernel", "l_train", "test_mean", "test_std", "train_mean", "train_std", "n_seeds"],
            &table,
        )?;
        let mut outputs = vec!["accuracy.csv".to_string()];
        for (kind, m) in &report.confusion {
            let name = format!("confusion_{}.csv", kind.name());
            let header: Vec<String> = std::iter::once("truth".to_string())
                .chain((0..n_classes).map(|c| format!("pred_{c}")))
                .collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let body: Vec<Vec<String>> = m
                .iter()
                .enumerate()
                .map(|(t, row)| {
                    std::iter::once(t.to_string())
                        .chain(row.iter().map(|v| v.to_string()))
                        .collect()
                })
                .collect();
            write_csv(&out.join(&name), &header, &body)?;
            outputs.push(name);
        }
        let outputs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        write_metadata(out, "classify", cfg, &[&data_bytes], seeds, &outputs)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------- budget

#[derive(Clone, Debug, Serialize)]
pub struct BudgetSummary {
    pub report: BudgetReport,
    pub rate: f64,
    pub hours: f64,
    /// Hours at two significant figures, e.g. "≈220 h".
    pub display: String,
}

/// Rounds to two significant figures and prints without spurious decimals.
pub fn two_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(exp - 1);
    let rounded = (x / scale).round() * scale;
    let decimals = (1 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

pub fn cmd_budget(strategy: Strategy, l: u64, s: u64, r: u64, rate: f64) -> Result<BudgetSummary> {
    if l == 0 || s == 0 || r == 0 {
        return Err(ExperimentError::Invalid("L, s and r must be positive".into()));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(ExperimentError::Invalid("rate must be positive".into()));
    }
    let report = budget(strategy, l, s, r);
    let hours = report.hours_at(rate);
    Ok(BudgetSummary {
        display: format!("≈{} h", two_significant(hours)),
        report,
        rate,
        hours,
    })
}

// ------------------------------------------------------------------ qfim

#[derive(Clone, Debug, Serialize)]
pub struct QfimCheck {
    pub n_qubits: usize,
    pub n_params: usize,
    pub max_abs_deviation_from_identity: f64,
    pub eigenvalue_min: f64,
    pub eigenvalue_max: f64,
    pub eigenvalue_mean: f64,
    pub rank: usize,
    pub rank_bound: u128,
}

pub fn cmd_qfim_check(cfg: &RunConfig, out: Option<&Path>) -> Result<QfimCheck> {
    cfg.validate()?;
    let circuit = cfg.circuit.build()?;
    let theta_r = reference_params(cfg, &circuit)?;
    let spec = qfim(&circuit, &theta_r)?;
    let ev = &spec.eigenvalues;
    let check = QfimCheck {
        n_qubits: circuit.n_qubits(),
        n_params: circuit.n_params(),
        max_abs_deviation_from_identity: spec.max_deviation_from_identity(),
        eigenvalue_min: ev.iter().copied().fold(f64::INFINITY, f64::min),
        eigenvalue_max: ev.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        eigenvalue_mean: ev.iter().sum::<f64>() / ev.len() as f64,
        rank: spec.rank,
        rank_bound: rank_bound(circuit.n_qubits()),
    };
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        fs::write(out.join("qfim.json"), serde_json::to_string_pretty(&check)?)?;
        let seeds = BTreeMap::from([("experiment".to_string(), cfg.experiment.seed)]);
        write_metadata(out, "qfim-check", cfg, &[], seeds, &["qfim.json"])?;
    }
    Ok(check)
}
