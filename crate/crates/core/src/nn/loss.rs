use ndarray::{Array2, Axis};

/// Probabilities are clamped to at least this before taking the log.
pub const CE_EPSILON: f64 = 1e-12;

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

pub fn log_softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row -= lse;
    }
    out
}

/// Mean of `-ln(max(p[target], eps))` over rows.
pub fn cross_entropy(probs: &Array2<f64>, targets: &[usize]) -> f64 {
    assert_eq!(probs.nrows(), targets.len());
    if targets.is_empty() {
        return 0.0;
    }
    let total: f64 = probs
        .axis_iter(Axis(0))
        .zip(targets)
        .map(|(row, &t)| -row[t].max(CE_EPSILON).ln())
        .sum();
    total / targets.len() as f64
}

/// Summed cross-entropy of softmax outputs and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Array2<f64>, targets: &[usize]) -> (f64, Array2<f64>) {
    assert_eq!(logits.nrows(), targets.len());
    let log_probs = log_softmax_rows(logits);
    let mut grad = log_probs.mapv(f64::exp);
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        loss -= log_probs[(i, t)];
        grad[(i, t)] -= 1.0;
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{assert_grad_close, numeric_input_grad};
    use ndarray::array;

    #[test]
    fn uniform_logits() {
        let p = softmax_rows(&Array2::zeros((2, 4)));
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let ce = cross_entropy(&p, &[0, 3]);
        assert!((ce - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn clamp_bounds_loss() {
        let p = array![[1.0, 0.0]];
        assert!((cross_entropy(&p, &[1]) - (-CE_EPSILON.ln())).abs() < 1e-9);
    }

    #[test]
    fn large_logits_are_stable() {
        let l = array![[1000.0, 0.0, -1000.0]];
        let p = softmax_rows(&l);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((log_softmax_rows(&l)[(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_numeric() {
        let logits = array![[0.3, -1.2, 2.0], [0.0, 0.5, -0.5]];
        let targets = [2, 0];
        let (loss, grad) = softmax_cross_entropy(&logits, &targets);
        let direct = cross_entropy(&softmax_rows(&logits), &targets) * 2.0;
        assert!((loss - direct).abs() < 1e-12);
        let num = numeric_input_grad(&logits, |l| softmax_cross_entropy(l, &targets).0);
        assert_grad_close(&grad, &num, 1e-6);
    }
}
