//! Small dense network toolkit with hand-derived gradients.
//!
//! Layers keep no hidden state between calls: `forward` returns the output
//! together with a cache and `backward` consumes that cache, accumulating
//! parameter gradients into [`Param::grad`] and returning the input gradient.

pub mod checkpoint;
mod cnn;
pub mod gradcheck;
mod layers;
mod loss;
mod lstm;
mod optim;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use cnn::{CnnCache, CnnMaxPool};
pub use layers::{Dropout, Embedding, Linear};
pub use loss::{cross_entropy, log_softmax_rows, softmax_rows, softmax_cross_entropy, CE_EPSILON};
pub use lstm::{BiLstm, BiLstmCache, Lstm, LstmCache};
pub use optim::{clip_grad_norm, global_grad_norm, Adam};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NnError {
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("non-finite loss")]
    NonFiniteLoss,
}

/// A trainable matrix and its accumulated gradient. Vectors are stored as `1 x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Anything owning parameters. Order of the returned lists must be stable.
pub trait Module {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// Uniform in `±sqrt(1 / fan_in)`.
pub fn init_uniform<R: Rng>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Array2<f64> {
    let bound = (1.0 / fan_in.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

pub fn init_normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
