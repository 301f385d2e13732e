//! Digits dataset loading, leakage-free standardization and PCA, and seeded
//! train/test splits.
//!
//! Every fitted transform is stored as a [`Transform`] in the dataset's
//! provenance so a run can be replayed on new data exactly.

use std::fs;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::symmetric_eigen;
use crate::rng::{domain, stream};

pub const DIGITS_PIXELS: usize = 64;
pub const DIGITS_CLASSES: usize = 10;
const MAX_PIXEL: f64 = 16.0;

static BUNDLED_DIGITS: &str = include_str!("../data/digits.csv");

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}, column {column}: pixel {value} outside [0, 16]")]
    PixelRange { line: usize, column: usize, value: f64 },
    #[error("line {line}: label {label} outside 0..{DIGITS_CLASSES}")]
    LabelRange { line: usize, label: i64 },
    #[error("dataset is empty")]
    Empty,
    #[error("feature counts differ: fitted on {fitted}, got {got}")]
    FeatureMismatch { fitted: usize, got: usize },
    #[error("cannot keep {m} components of {available} features")]
    TooManyComponents { m: usize, available: usize },
    #[error("test size {n_test} must be smaller than the dataset ({len} rows)")]
    BadSplit { n_test: usize, len: usize },
    #[error("feature matrix contains a non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// Fitted, replayable feature transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Transform {
    /// `x ↦ (x − mean) · scale` per column.
    Standardize { mean: Vec<f64>, scale: Vec<f64> },
    /// `x ↦ (x − mean) · components`, components stored column-major (M×m).
    Pca {
        mean: Vec<f64>,
        n_features: usize,
        components: Vec<f64>,
        eigenvalues: Vec<f64>,
    },
}

impl Transform {
    pub fn n_inputs(&self) -> usize {
        match self {
            Transform::Standardize { mean, .. } => mean.len(),
            Transform::Pca { n_features, .. } => *n_features,
        }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_inputs() {
            return Err(DataError::FeatureMismatch {
                fitted: self.n_inputs(),
                got: x.ncols(),
            });
        }
        Ok(match self {
            Transform::Standardize { mean, scale } => {
                DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - mean[j]) * scale[j])
            }
            Transform::Pca {
                mean,
                n_features,
                components,
                ..
            } => {
                let m = components.len() / n_features;
                let v = DMatrix::from_column_slice(*n_features, m, components);
                let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[j]);
                centered * v
            }
        })
    }

    fn describe(&self) -> String {
        match self {
            Transform::Standardize { mean, .. } => format!("standardize({} features)", mean.len()),
            Transform::Pca {
                n_features,
                components,
                ..
            } => format!("pca({} -> {})", n_features, components.len() / n_features),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    /// Human-readable history, one entry per operation.
    pub log: Vec<String>,
    /// Fitted transforms in application order.
    pub transforms: Vec<Transform>,
}

/// Labelled feature matrix (rows are samples).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub labels: Vec<usize>,
    /// Row positions in the originally loaded file.
    pub row_ids: Vec<usize>,
    pub feature_names: Option<Vec<String>>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i)).collect()
    }

    /// Rows `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let features = DMatrix::from_fn(indices.len(), self.n_features(), |i, j| {
            self.features[(indices[i], j)]
        });
        let mut provenance = self.provenance.clone();
        provenance.log.push(format!("subset({} rows)", indices.len()));
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
            feature_names: self.feature_names.clone(),
            provenance,
        }
    }

    fn check_finite(&self) -> Result<()> {
        for col in 0..self.features.ncols() {
            for row in 0..self.features.nrows() {
                if !self.features[(row, col)].is_finite() {
                    return Err(DataError::NonFinite { row, col });
                }
            }
        }
        Ok(())
    }

    fn transformed(&self, t: &Transform) -> Result<Dataset> {
        let features = t.apply(&self.features)?;
        let mut provenance = self.provenance.clone();
        provenance.log.push(t.describe());
        provenance.transforms.push(t.clone());
        let feature_names = match t {
            Transform::Standardize { .. } => self.feature_names.clone(),
            Transform::Pca { .. } => Some((0..features.ncols()).map(|k| format!("pc{k}")).collect()),
        };
        Ok(Dataset {
            features,
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
            feature_names,
            provenance,
        })
    }

    /// Writes `{stem}.csv` (features then label, with header) and the
    /// transform log as `{stem}.json`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
        let names = self
            .feature_names
            .clone()
            .unwrap_or_else(|| (0..self.n_features()).map(|k| format!("f{k}")).collect());
        let mut header = vec!["row_id".to_string()];
        header.extend(names);
        header.push("label".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.row_ids[i].to_string()];
            rec.extend(self.features.row(i).iter().map(|v| format!("{v:e}")));
            rec.push(self.labels[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&self.provenance)?,
        )?;
        Ok(())
    }
}

/// Loads 8×8 digit images: 64 integer pixels in `[0, 16]` then a label
/// `0..=9` per line, no header.
pub fn load_digits_csv(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path)?;
    parse_digits(file, &path.display().to_string())
}

/// The 1797-image digits set shipped with the crate.
pub fn bundled_digits() -> Result<Dataset> {
    parse_digits(BUNDLED_DIGITS.as_bytes(), "bundled:digits.csv")
}

pub fn parse_digits<R: Read>(reader: R, source: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if rec.len() != DIGITS_PIXELS + 1 {
            return Err(DataError::Malformed {
                line,
                reason: format!("expected {} columns, found {}", DIGITS_PIXELS + 1, rec.len()),
            });
        }
        for (column, field) in rec.iter().take(DIGITS_PIXELS).enumerate() {
            let value: f64 = field.parse().map_err(|_| DataError::Malformed {
                line,
                reason: format!("column {column}: {field:?} is not a number"),
            })?;
            if !(0.0..=MAX_PIXEL).contains(&value) || value.fract() != 0.0 {
                return Err(DataError::PixelRange {
                    line,
                    column,
                    value,
                });
            }
            values.push(value);
        }
        let field = &rec[DIGITS_PIXELS];
        let label: i64 = field.parse().map_err(|_| DataError::Malformed {
            line,
            reason: format!("label {field:?} is not an integer"),
        })?;
        if !(0..DIGITS_CLASSES as i64).contains(&label) {
            return Err(DataError::LabelRange { line, label });
        }
        labels.push(label as usize);
    }
    if labels.is_empty() {
        return Err(DataError::Empty);
    }
    let n = labels.len();
    Ok(Dataset {
        features: DMatrix::from_row_slice(n, DIGITS_PIXELS, &values),
        labels,
        row_ids: (0..n).collect(),
        feature_names: None,
        provenance: Provenance {
            source: source.to_string(),
            log: vec![format!("load({n} rows)")],
            transforms: Vec::new(),
        },
    })
}

/// Per-column affine map to mean 0 and variance `1/√M` (population
/// variance of the fitted data); constant columns map to 0.
pub fn fit_standardize(train: &Dataset) -> Result<Transform> {
    if train.is_empty() {
        return Err(DataError::Empty);
    }
    train.check_finite()?;
    let (n, m) = (train.len() as f64, train.n_features());
    let target_sd = (1.0 / (m as f64).sqrt()).sqrt();
    let mut mean = Vec::with_capacity(m);
    let mut scale = Vec::with_capacity(m);
    for col in train.features.column_iter() {
        let mu = col.sum() / n;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        mean.push(mu);
        // a column that is constant up to rounding carries no information
        scale.push(if var > 1e-24 * (1.0 + mu * mu) {
            target_sd / var.sqrt()
        } else {
            0.0
        });
    }
    Ok(Transform::Standardize { mean, scale })
}

/// Fits the standardization on `train` and applies it to `apply_to`.
pub fn standardize(train: &Dataset, apply_to: &Dataset) -> Result<Dataset> {
    apply_to.transformed(&fit_standardize(train)?)
}

/// Top-`m` principal axes of the training covariance. Each axis is signed so
/// its largest-magnitude component is positive.
pub fn fit_pca(train: &Dataset, m: usize) -> Result<Transform> {
    let n_features = train.n_features();
    if m > n_features {
        return Err(DataError::TooManyComponents {
            m,
            available: n_features,
        });
    }
    if train.len() < 2 {
        return Err(DataError::Empty);
    }
    train.check_finite()?;
    let n = train.len() as f64;
    let mean: Vec<f64> = train.features.column_iter().map(|c| c.sum() / n).collect();
    let centered = DMatrix::from_fn(train.len(), n_features, |i, j| {
        train.features[(i, j)] - mean[j]
    });
    let cov = (centered.transpose() * &centered) / (n - 1.0);
    let eig = symmetric_eigen(&cov);
    let mut components = Vec::with_capacity(n_features * m);
    for k in 0..m {
        let mut v: DVector<f64> = eig.vectors.column(k).into_owned();
        let lead = v.iter().copied().fold(0.0f64, |best, x| {
            if x.abs() > best.abs() {
                x
            } else {
                best
            }
        });
        if lead < 0.0 {
            v.neg_mut();
        }
        components.extend(v.iter());
    }
    Ok(Transform::Pca {
        mean,
        n_features,
        components,
        eigenvalues: eig.values[..m].to_vec(),
    })
}

/// Fits PCA on `train` and projects `apply_to` onto the top `m` axes.
pub fn pca(train: &Dataset, apply_to: &Dataset, m: usize) -> Result<Dataset> {
    apply_to.transformed(&fit_pca(train, m)?)
}

/// Uniformly random disjoint split; the first `n_test` shuffled rows form the
/// test set. Deterministic in `seed`.
pub fn split(ds: &Dataset, n_test: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if n_test >= ds.len() {
        return Err(DataError::BadSplit {
            n_test,
            len: ds.len(),
        });
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut stream(seed, domain::SPLIT, 0));
    let mut test = ds.subset(&order[..n_test]);
    let mut train = ds.subset(&order[n_test..]);
    test.provenance.log.push(format!("split(test, seed={seed})"));
    train.provenance.log.push(format!("split(train, seed={seed})"));
    Ok((train, test))
}

/// Where PCA sits relative to standardization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineOrder {
    /// standardize → PCA → re-standardize the components
    #[default]
    StandardizeFirst,
    /// PCA on raw pixels → standardize the components
    PcaFirst,
}

/// Fitted feature pipeline, replayable on any dataset with the same columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub steps: Vec<Transform>,
}

impl Pipeline {
    /// Fits on `train` only. `pca_m = None` skips dimensionality reduction.
    pub fn fit(train: &Dataset, pca_m: Option<usize>, order: PipelineOrder) -> Result<Pipeline> {
        let mut steps = Vec::new();
        let mut current = train.clone();
        let mut push = |t: Transform, current: &mut Dataset| -> Result<()> {
            *current = current.transformed(&t)?;
            steps.push(t);
            Ok(())
        };
        match (pca_m, order) {
            (None, _) => push(fit_standardize(&current)?, &mut current)?,
            (Some(m), PipelineOrder::StandardizeFirst) => {
                push(fit_standardize(&current)?, &mut current)?;
                push(fit_pca(&current, m)?, &mut current)?;
                push(fit_standardize(&current)?, &mut current)?;
            }
            (Some(m), PipelineOrder::PcaFirst) => {
                push(fit_pca(&current, m)?, &mut current)?;
                push(fit_standardize(&current)?, &mut current)?;
            }
        }
        Ok(Pipeline { steps })
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        self.steps.iter().try_fold(ds.clone(), |acc, t| acc.transformed(t))
    }
}
