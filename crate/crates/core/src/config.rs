//! Run configuration: one TOML file with `[circuit]`, `[encoding]`,
//! `[measurement]`, `[svm]`, `[experiment]` and `[io]` tables. Unknown keys
//! are rejected; every table and key has a default, so an empty file is a
//! valid (small) run. Command-line flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{build_npqc, build_yzcx, npqc_max_layers, CircuitSpec};
use crate::datapipe::PipelineOrder;
use crate::estimation::MitigationFormula;
use crate::fleet::WorkerSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config key `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitVariant {
    Npqc,
    Yzcx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitConfig {
    pub variant: CircuitVariant,
    pub n_qubits: usize,
    pub layers: usize,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        CircuitConfig {
            variant: CircuitVariant::Npqc,
            n_qubits: 8,
            layers: 4,
        }
    }
}

impl CircuitConfig {
    pub fn build(&self) -> Result<CircuitSpec, crate::circuits::CircuitError> {
        match self.variant {
            CircuitVariant::Npqc => build_npqc(self.n_qubits, self.layers),
            CircuitVariant::Yzcx => build_yzcx(self.n_qubits, self.layers),
        }
    }
}

/// How the reference parameters θ_r are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaPolicy {
    /// The NPQC point with identity QFIM (NPQC only).
    NpqcReference,
    /// Uniform in [0, 2π), seeded from the experiment seed.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    /// Feature scale c in θ = θ_r + c·x.
    pub c: f64,
    pub theta_r: ThetaPolicy,
    /// Parameters driven by features; `None` uses every parameter.
    pub feature_dim: Option<usize>,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            c: 1.0,
            theta_r: ThetaPolicy::NpqcReference,
            feature_dim: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Number of random local bases.
    pub r: usize,
    /// Shots per basis.
    pub s: u64,
    /// Global depolarizing probability (ignored when `fleet` is set).
    pub p: f64,
    pub mitigation: MitigationFormula,
    /// Project estimated kernels onto the PSD cone before SVM training.
    pub clip_negative: bool,
    /// Optional device fleet; records are merged into one kernel.
    pub fleet: Vec<WorkerSpec>,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        MeasurementConfig {
            r: 8,
            s: 8192,
            p: 0.0,
            mitigation: MitigationFormula::Full,
            clip_negative: true,
            fleet: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    #[serde(rename = "C")]
    pub c: f64,
    /// PCA components kept; `None` skips PCA.
    pub pca_m: Option<usize>,
    pub pipeline_order: PipelineOrder,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: crate::learner::DEFAULT_C,
            pca_m: Some(36),
            pipeline_order: PipelineOrder::StandardizeFirst,
        }
    }
}

/// Kernel kinds compared by the classification experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyKernel {
    /// Isotropic radial basis function reference.
    Rbf,
    /// Exact state fidelities.
    Exact,
    /// Randomized measurements without noise.
    Estimated,
    /// Randomized measurements at noise p, mitigated.
    Mitigated,
    /// Randomized measurements at noise p, no mitigation.
    Unmitigated,
}

impl ClassifyKernel {
    pub fn name(self) -> &'static str {
        match self {
            ClassifyKernel::Rbf => "rbf",
            ClassifyKernel::Exact => "exact",
            ClassifyKernel::Estimated => "estimated",
            ClassifyKernel::Mitigated => "mitigated",
            ClassifyKernel::Unmitigated => "unmitigated",
        }
    }
}

/// Which states the mitigation sweep measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStates {
    /// Uniformly random circuit parameters.
    Random,
    /// θ_r plus Gaussian features of variance 1/√M.
    Encoded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// Seeds (splits / basis draws) averaged per classification point.
    pub repeats: usize,
    pub training_sizes: Vec<usize>,
    pub n_test: usize,
    pub kernels: Vec<ClassifyKernel>,
    /// Feature pairs sampled by `kernel`.
    pub n_pairs: usize,
    /// Pair separations are scaled by U(0, pair_spread).
    pub pair_spread: f64,
    /// States in the mitigation sweep.
    pub n_states: usize,
    pub sweep_states: SweepStates,
    pub p_values: Vec<f64>,
    pub target: f64,
    /// Shot grid of the sweep is 2^1 … 2^max_exponent.
    pub max_exponent: u32,
    pub refine_s_min: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "run".into(),
            seed: 1,
            repeats: 5,
            training_sizes: vec![50, 200, 600, 1300],
            n_test: 200,
            kernels: vec![
                ClassifyKernel::Rbf,
                ClassifyKernel::Exact,
                ClassifyKernel::Estimated,
                ClassifyKernel::Mitigated,
                ClassifyKernel::Unmitigated,
            ],
            n_pairs: 50,
            pair_spread: 2.0,
            n_states: 30,
            sweep_states: SweepStates::Random,
            p_values: vec![0.0, 0.2, 0.4, 0.6],
            target: 0.1,
            max_exponent: 16,
            refine_s_min: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    /// Digits CSV; the bundled copy when absent.
    pub dataset: Option<PathBuf>,
    /// Output directory; `runs/<name>` when absent.
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub circuit: CircuitConfig,
    pub encoding: EncodingConfig,
    pub measurement: MeasurementConfig,
    pub svm: SvmConfig,
    pub experiment: ExperimentConfig,
    pub io: IoConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.io
            .out
            .clone()
            .unwrap_or_else(|| Path::new("runs").join(&self.experiment.name))
    }

    /// Checks every value against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.circuit;
        if c.n_qubits == 0 {
            return Err(invalid("circuit.n_qubits", "must be at least 1"));
        }
        if c.n_qubits > crate::simulator::DEFAULT_QUBIT_CAP {
            return Err(invalid(
                "circuit.n_qubits",
                format!("at most {} qubits are simulated", crate::simulator::DEFAULT_QUBIT_CAP),
            ));
        }
        if c.layers == 0 {
            return Err(invalid("circuit.layers", "must be at least 1"));
        }
        if c.variant == CircuitVariant::Npqc {
            if !c.n_qubits.is_multiple_of(2) {
                return Err(invalid("circuit.n_qubits", "NPQC needs an even qubit count"));
            }
            let max = npqc_max_layers(c.n_qubits);
            if c.layers > max {
                return Err(invalid(
                    "circuit.layers",
                    format!("NPQC on {} qubits allows at most {max} layers", c.n_qubits),
                ));
            }
        }
        if c.variant == CircuitVariant::Yzcx && self.encoding.theta_r == ThetaPolicy::NpqcReference {
            return Err(invalid("encoding.theta_r", "npqc_reference needs variant = \"npqc\""));
        }
        let e = &self.encoding;
        if !(e.c.is_finite() && e.c > 0.0) {
            return Err(invalid("encoding.c", "must be positive"));
        }
        let n_params = match c.variant {
            CircuitVariant::Npqc => c.n_qubits * (c.layers + 1),
            CircuitVariant::Yzcx => self.circuit.build().map(|s| s.n_params()).unwrap_or(0),
        };
        if let Some(dim) = e.feature_dim {
            if dim == 0 || dim > n_params {
                return Err(invalid(
                    "encoding.feature_dim",
                    format!("must be in 1..={n_params} for this circuit"),
                ));
            }
        }
        let m = &self.measurement;
        if m.r == 0 {
            return Err(invalid("measurement.r", "at least one basis is required"));
        }
        if m.s < 2 {
            return Err(invalid("measurement.s", "at least 2 shots per basis are required"));
        }
        if !(0.0..=1.0).contains(&m.p) {
            return Err(invalid("measurement.p", "must lie in [0, 1]"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for w in &m.fleet {
            if !ids.insert(&w.worker_id) {
                return Err(invalid("measurement.fleet", format!("duplicate worker_id {:?}", w.worker_id)));
            }
            if !(0.0..=1.0).contains(&w.p) {
                return Err(invalid("measurement.fleet", format!("worker {:?}: p outside [0, 1]", w.worker_id)));
            }
            if w.throughput.is_nan() || w.throughput <= 0.0 {
                return Err(invalid(
                    "measurement.fleet",
                    format!("worker {:?}: throughput must be positive", w.worker_id),
                ));
            }
        }
        let s = &self.svm;
        if !(s.c.is_finite() && s.c > 0.0) {
            return Err(invalid("svm.C", "must be positive"));
        }
        if let Some(pm) = s.pca_m {
            if pm == 0 || pm > crate::datapipe::DIGITS_PIXELS {
                return Err(invalid("svm.pca_m", "must be in 1..=64"));
            }
        }
        let x = &self.experiment;
        if x.name.is_empty() || x.name.contains(['/', '\\']) {
            return Err(invalid("experiment.name", "must be a non-empty file-name-safe string"));
        }
        if x.repeats == 0 {
            return Err(invalid("experiment.repeats", "must be at least 1"));
        }
        if x.training_sizes.iter().any(|&n| n < 2) {
            return Err(invalid("experiment.training_sizes", "each size must be at least 2"));
        }
        if x.n_pairs == 0 {
            return Err(invalid("experiment.n_pairs", "must be at least 1"));
        }
        if !(x.pair_spread.is_finite() && x.pair_spread > 0.0) {
            return Err(invalid("experiment.pair_spread", "must be positive"));
        }
        if x.n_states < 2 {
            return Err(invalid("experiment.n_states", "must be at least 2"));
        }
        if x.p_values.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(invalid("experiment.p_values", "each p must lie in [0, 1)"));
        }
        if !(x.target > 0.0 && x.target < 1.0) {
            return Err(invalid("experiment.target", "must lie in (0, 1)"));
        }
        if x.max_exponent == 0 || x.max_exponent > 30 {
            return Err(invalid("experiment.max_exponent", "must be in 1..=30"));
        }
        Ok(())
    }
}
