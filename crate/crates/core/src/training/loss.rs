use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean softmax cross-entropy over a batch of row-major `B × classes`
/// logits, with the gradient `(softmax − onehot) / B`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], classes: usize, labels: &[usize]) -> Result<(f64, Vec<T>)> {
    if classes < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {classes}")));
    }
    let b = labels.len();
    if logits.len() != b * classes {
        return Err(Error::invalid(format!(
            "{} logits for {b} labels × {classes} classes",
            logits.len()
        )));
    }
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (row, &label) in logits.chunks(classes).zip(labels) {
        if label >= classes {
            return Err(Error::invalid(format!("label {label} out of range for {classes} classes")));
        }
        let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        loss += sum.ln() - (row[label].as_f64() - max);
        for (j, e) in exps.iter().enumerate() {
            let onehot = if j == label { 1.0 } else { 0.0 };
            grad.push(T::of((e / sum - onehot) / b as f64));
        }
    }
    Ok((loss / b as f64, grad))
}

/// Index of the largest logit per row; ties resolve to the lowest index.
pub fn argmax_rows<T: Scalar>(logits: &[T], classes: usize) -> Vec<usize> {
    logits
        .chunks(classes)
        .map(|row| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    #[test]
    fn uniform_logits_give_ln_c() {
        let (loss, _) = softmax_cross_entropy(&[0.3f64; 7], 7, &[4]).unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn extreme_logits_are_stable() {
        let (loss, grad) = softmax_cross_entropy(&[1000.0f32, -1000.0], 2, &[0]).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut x = reference::random_unit_vec(12, 3);
        let labels = [1, 0, 3];
        let (_, grad) = softmax_cross_entropy(&x, 4, &labels).unwrap();
        for i in 0..x.len() {
            let mut f = |v: &[f64]| softmax_cross_entropy(v, 4, &labels).unwrap().0;
            let n = reference::central_difference(&mut f, &mut x, i, 1e-3);
            assert!(reference::grad_rel_error(grad[i], n, 1e-8) < 1e-5, "{i}");
        }
    }

    #[test]
    fn bad_label_rejected() {
        assert!(softmax_cross_entropy(&[0.0f64; 4], 2, &[0, 2]).is_err());
    }

    #[test]
    fn argmax_tie_goes_low() {
        assert_eq!(argmax_rows(&[1.0f64, 3.0, 3.0, 0.0, 0.0, 0.0], 3), vec![1, 0]);
    }
}
