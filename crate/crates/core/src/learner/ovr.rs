use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::smo::{kernel_checksum, train_binary_with, validate_kernel, SmoParams, SvmModel};
use super::{LearnerError, Result};

/// One binary SVM per class, each separating that class from all others.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OvrClassifier {
    pub models: Vec<SvmModel>,
    pub classes: Vec<usize>,
    pub kernel_checksum: String,
}

/// Trains one model per class `0..=max(labels)` on the shared kernel `k`.
pub fn train_ovr(k: &DMatrix<f64>, labels: &[usize], params: &SmoParams) -> Result<OvrClassifier> {
    validate_kernel(k)?;
    if k.nrows() != labels.len() {
        return Err(LearnerError::LengthMismatch {
            expected: k.nrows(),
            got: labels.len(),
        });
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    if n_classes < 2 {
        return Err(LearnerError::OneClass);
    }
    if let Some(missing) = (0..n_classes).find(|c| !labels.contains(c)) {
        return Err(LearnerError::MissingClass(missing));
    }
    let models = (0..n_classes)
        .into_par_iter()
        .map(|class| {
            let y: Vec<i8> = labels
                .iter()
                .map(|&l| if l == class { 1 } else { -1 })
                .collect();
            let mut model = train_binary_with(k, &y, params)?;
            model.class_label = Some(class);
            Ok(model)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OvrClassifier {
        models,
        classes: (0..n_classes).collect(),
        kernel_checksum: kernel_checksum(k),
    })
}

impl OvrClassifier {
    pub fn decision_values(&self, k_row: &[f64]) -> Result<Vec<f64>> {
        self.models.iter().map(|m| m.decision_value(k_row)).collect()
    }

    /// Class with the largest decision value; ties go to the smallest index.
    pub fn predict(&self, k_row: &[f64]) -> Result<usize> {
        let values = self.decision_values(k_row)?;
        let mut best = 0;
        for (c, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = c;
            }
        }
        Ok(self.classes[best])
    }

    /// Predicts every row of a `n_test × L_train` cross-kernel.
    pub fn predict_rows(&self, k_test: &DMatrix<f64>) -> Result<Vec<usize>> {
        (0..k_test.nrows())
            .map(|i| {
                let row: Vec<f64> = k_test.row(i).iter().copied().collect();
                self.predict(&row)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (DMatrix<f64>, Vec<usize>) {
        // three tight clusters on a line, Gaussian kernel
        let xs = [0.0, 0.1, 0.2, 5.0, 5.1, 5.2, 10.0, 10.1];
        let labels = vec![0, 0, 0, 1, 1, 1, 2, 2];
        let k = DMatrix::from_fn(xs.len(), xs.len(), |i, j| {
            let d: f64 = xs[i] - xs[j];
            (-d * d).exp()
        });
        (k, labels)
    }

    #[test]
    fn one_model_per_class_and_training_fit() {
        let (k, labels) = toy();
        let clf = train_ovr(&k, &labels, &SmoParams::new(10.0)).unwrap();
        assert_eq!(clf.models.len(), 3);
        let pred = clf.predict_rows(&k).unwrap();
        assert_eq!(pred, labels);
    }

    #[test]
    fn missing_class_rejected() {
        let (k, mut labels) = toy();
        labels[6] = 3;
        labels[7] = 3;
        assert!(matches!(
            train_ovr(&k, &labels, &SmoParams::default()),
            Err(LearnerError::MissingClass(2))
        ));
    }

    #[test]
    fn ties_go_to_smallest_class() {
        let (k, labels) = toy();
        let mut clf = train_ovr(&k, &labels, &SmoParams::default()).unwrap();
        for m in &mut clf.models {
            m.alphas.iter_mut().for_each(|a| *a = 0.0);
            m.bias = 0.25;
        }
        assert_eq!(clf.predict(&[0.0; 8]).unwrap(), 0);
    }
}
