//! Central finite differences, used by tests to check analytic gradients.

use ndarray::Array2;

use super::Module;

pub const STEP: f64 = 1e-5;

/// Numeric gradient of `loss` w.r.t. the `index`-th parameter of `model`.
pub fn numeric_param_grad<M: Module>(model: &mut M, index: usize, loss: impl Fn(&M) -> f64) -> Array2<f64> {
    let shape = model.params()[index].value.raw_dim();
    let mut grad = Array2::zeros(shape);
    let coords: Vec<(usize, usize)> = grad.indexed_iter().map(|(ix, _)| ix).collect();
    for ix in coords {
        let orig = model.params()[index].value[ix];
        model.params_mut()[index].value[ix] = orig + STEP;
        let plus = loss(model);
        model.params_mut()[index].value[ix] = orig - STEP;
        let minus = loss(model);
        model.params_mut()[index].value[ix] = orig;
        grad[ix] = (plus - minus) / (2.0 * STEP);
    }
    grad
}

/// Numeric gradient of `loss` w.r.t. its matrix argument.
pub fn numeric_input_grad(x: &Array2<f64>, loss: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut probe = x.clone();
    let mut grad = Array2::zeros(x.raw_dim());
    for (ix, g) in grad.indexed_iter_mut() {
        let orig = probe[ix];
        probe[ix] = orig + STEP;
        let plus = loss(&probe);
        probe[ix] = orig - STEP;
        let minus = loss(&probe);
        probe[ix] = orig;
        *g = (plus - minus) / (2.0 * STEP);
    }
    grad
}

/// `|a - b| / (|a| + |b|)` in Frobenius norm; zero when both vanish.
pub fn relative_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    let norm = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = norm(&(analytic - numeric));
    let scale = norm(analytic) + norm(numeric);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

#[track_caller]
pub fn assert_grad_close(analytic: &Array2<f64>, numeric: &Array2<f64>, tol: f64) {
    let err = relative_error(analytic, numeric);
    assert!(err < tol, "relative gradient error {err:e} >= {tol:e}\nanalytic {analytic:?}\nnumeric {numeric:?}");
}
