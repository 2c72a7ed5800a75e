use ndarray::{Array2, Axis};
use rand::Rng;

use super::{init_normal, init_uniform, Module, Param};

/// `y = x W + b` with `W: [in x out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new<R: Rng>(name: &str, d_in: usize, d_out: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::new(format!("{name}.weight"), init_uniform(d_in, d_out, d_in, rng)),
            bias: Param::new(format!("{name}.bias"), Array2::zeros((1, d_out))),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.value) + &self.bias.value
    }

    pub fn backward(&mut self, x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        self.weight.grad += &x.t().dot(dy);
        self.bias.grad += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&self.weight.value.t())
    }
}

impl Module for Linear {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Trainable lookup table `[vocab x dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub table: Param,
}

impl Embedding {
    pub fn new<R: Rng>(name: &str, vocab: usize, dim: usize, rng: &mut R) -> Self {
        Self {
            table: Param::new(format!("{name}.table"), init_normal(vocab, dim, rng)),
        }
    }

    pub fn dim(&self) -> usize {
        self.table.value.ncols()
    }

    pub fn forward(&self, ids: &[usize]) -> Array2<f64> {
        self.table.value.select(Axis(0), ids)
    }

    pub fn backward(&mut self, ids: &[usize], dy: &Array2<f64>) {
        for (row, &id) in dy.rows().into_iter().zip(ids) {
            let mut g = self.table.grad.row_mut(id);
            g += &row;
        }
    }
}

impl Module for Embedding {
    fn params(&self) -> Vec<&Param> {
        vec![&self.table]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.table]
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 - p)` so eval mode is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub p: f64,
}

impl Dropout {
    pub fn new(p: f64) -> Self {
        assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
        Self { p }
    }

    /// Returns the output and the scaling mask (`None` when nothing was dropped).
    pub fn forward<R: Rng>(&self, x: &Array2<f64>, train: bool, rng: &mut R) -> (Array2<f64>, Option<Array2<f64>>) {
        if !train || self.p == 0.0 {
            return (x.clone(), None);
        }
        let keep = 1.0 / (1.0 - self.p);
        let mask = Array2::from_shape_simple_fn(x.raw_dim(), || if rng.random::<f64>() < self.p { 0.0 } else { keep });
        (x * &mask, Some(mask))
    }

    pub fn backward(mask: Option<&Array2<f64>>, dy: Array2<f64>) -> Array2<f64> {
        match mask {
            Some(m) => dy * m,
            None => dy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{assert_grad_close, numeric_input_grad, numeric_param_grad};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i + j) as f64);
        assert_eq!(Dropout::new(0.0).forward(&x, true, &mut rng).0, x);
        assert_eq!(Dropout::new(0.5).forward(&x, false, &mut rng).0, x);
    }

    #[test]
    fn dropout_scales_survivors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_elem((50, 40), 1.0);
        let (y, mask) = Dropout::new(0.5).forward(&x, true, &mut rng);
        assert!(y.iter().all(|&v| v == 0.0 || v == 2.0));
        let kept = y.iter().filter(|&&v| v > 0.0).count() as f64 / 2000.0;
        assert!((kept - 0.5).abs() < 0.05);
        let dx = Dropout::backward(mask.as_ref(), Array2::ones((50, 40)));
        assert_eq!(dx, y);
    }

    #[test]
    fn linear_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut lin = Linear::new("l", 3, 2, &mut rng);
        lin.bias.value = init_uniform(1, 2, 1, &mut rng);
        let x = init_uniform(4, 3, 1, &mut rng);
        let w = init_uniform(4, 2, 1, &mut rng);
        let loss = |l: &Linear, x: &Array2<f64>| (l.forward(x) * &w).sum();
        let dx = lin.backward(&x, &w);
        let num_w = numeric_param_grad(&mut lin.clone(), 0, |l| loss(l, &x));
        assert_grad_close(&lin.weight.grad, &num_w, 1e-4);
        let num_b = numeric_param_grad(&mut lin.clone(), 1, |l| loss(l, &x));
        assert_grad_close(&lin.bias.grad, &num_b, 1e-4);
        let num_x = numeric_input_grad(&x, |xx| loss(&lin, xx));
        assert_grad_close(&dx, &num_x, 1e-4);
    }

    #[test]
    fn embedding_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut emb = Embedding::new("e", 5, 3, &mut rng);
        let ids = [1, 4, 1, 0];
        let w = init_uniform(4, 3, 1, &mut rng);
        emb.backward(&ids, &w);
        let num = numeric_param_grad(&mut emb.clone(), 0, |e| (e.forward(&ids) * &w).sum());
        assert_grad_close(&emb.table.grad, &num, 1e-4);
    }
}
