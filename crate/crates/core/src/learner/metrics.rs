use super::{LearnerError, Result};

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy<T: PartialEq>(pred: &[T], truth: &[T]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if truth.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// `n_classes × n_classes` counts indexed `[truth][predicted]`.
pub fn confusion(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<Vec<Vec<u64>>> {
    check_lengths(pred.len(), truth.len())?;
    let mut m = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        let worst = p.max(t);
        if worst >= n_classes {
            return Err(LearnerError::MissingClass(worst));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

fn check_lengths(pred: usize, truth: usize) -> Result<()> {
    if pred != truth {
        return Err(LearnerError::LengthMismatch {
            expected: truth,
            got: pred,
        });
    }
    Ok(())
}
