use ndarray::Array2;

use super::{NnError, Param};

/// Euclidean norm over all gradients.
pub fn global_grad_norm(params: &[&mut Param]) -> f64 {
    params
        .iter()
        .map(|p| p.grad.iter().map(|g| g * g).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Rescales gradients so the global norm is at most `max_norm`. Returns the
/// norm before clipping. Fails if any gradient is non-finite.
pub fn clip_grad_norm(params: &mut [&mut Param], max_norm: f64) -> Result<f64, NnError> {
    for p in params.iter() {
        if p.grad.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient(p.name.clone()));
        }
    }
    let norm = global_grad_norm(params);
    if norm > max_norm {
        let scale = max_norm / norm;
        for p in params.iter_mut() {
            p.grad *= scale;
        }
    }
    Ok(norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update; `params` must be passed in the same order every call.
    pub fn step(&mut self, params: &mut [&mut Param]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Array2::zeros(p.value.raw_dim())).collect();
            self.v = self.m.clone();
        }
        assert_eq!(self.m.len(), params.len(), "parameter list changed between steps");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut p.value)
                .and(&p.grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn clip_halves_norm_14_to_7() {
        let mut p = Param::new("p", Array2::zeros((1, 3)));
        p.grad = array![[4.0, 6.0, 12.0]];
        let mut ps = [&mut p];
        let before = clip_grad_norm(&mut ps, 7.0).unwrap();
        assert_eq!(before, 14.0);
        assert_eq!(p.grad, array![[2.0, 3.0, 6.0]]);
    }

    #[test]
    fn clip_leaves_small_gradients() {
        let mut p = Param::new("p", Array2::zeros((1, 2)));
        p.grad = array![[0.3, 0.4]];
        clip_grad_norm(&mut [&mut p], 7.0).unwrap();
        assert_eq!(p.grad, array![[0.3, 0.4]]);
    }

    #[test]
    fn clip_rejects_nan() {
        let mut p = Param::new("w", Array2::zeros((1, 2)));
        p.grad[(0, 1)] = f64::NAN;
        assert_eq!(
            clip_grad_norm(&mut [&mut p], 1.0),
            Err(NnError::NonFiniteGradient("w".into()))
        );
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Param::new("p", array![[1.0, -1.0]]);
        p.grad = array![[0.5, -3.0]];
        let mut opt = Adam::new(0.01);
        opt.step(&mut [&mut p]);
        assert!((p.value[(0, 0)] - 0.99).abs() < 1e-9);
        assert!((p.value[(0, 1)] + 0.99).abs() < 1e-9);
    }

    #[test]
    fn minimizes_quadratic() {
        let target = array![[3.0, -2.0, 0.5]];
        let mut p = Param::new("p", Array2::zeros((1, 3)));
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            p.grad = 2.0 * (&p.value - &target);
            opt.step(&mut [&mut p]);
        }
        let err = (&p.value - &target).iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(err < 1e-3, "residual {err}");
    }
}
