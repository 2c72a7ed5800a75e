//! Linear-chain CRF over per-token label scores.
//!
//! A path `y` over `n` tokens scores
//! `start[y0] + sum_t emit[t, y_t] + sum_t trans[y_{t-1}, y_t] + end[y_{n-1}]`.
//! Transitions forbidden by the mask score `-inf` in training and decoding,
//! so the partition function only sums over well-formed paths.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::nn::{init_uniform, Module, Param};
use crate::tagging::Scheme;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CrfError {
    #[error("gold path uses a forbidden transition at position {0}")]
    ForbiddenGold(usize),
    #[error("emission width {got} does not match {expected} labels")]
    Width { got: usize, expected: usize },
    #[error("{tags} gold tags for {tokens} tokens")]
    Length { tags: usize, tokens: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crf {
    pub transitions: Param,
    pub start: Param,
    pub end: Param,
    allowed: Array2<bool>,
    allowed_start: Vec<bool>,
    allowed_end: Vec<bool>,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Crf {
    /// Zero-initialised CRF with every transition allowed.
    pub fn unconstrained(labels: usize) -> Self {
        Self::with_mask(
            Array2::from_elem((labels, labels), true),
            vec![true; labels],
            vec![true; labels],
        )
    }

    pub fn with_mask(allowed: Array2<bool>, allowed_start: Vec<bool>, allowed_end: Vec<bool>) -> Self {
        let l = allowed.nrows();
        assert_eq!(allowed.ncols(), l);
        assert_eq!(allowed_start.len(), l);
        assert_eq!(allowed_end.len(), l);
        Self {
            transitions: Param::new("crf.transitions", Array2::zeros((l, l))),
            start: Param::new("crf.start", Array2::zeros((1, l))),
            end: Param::new("crf.end", Array2::zeros((1, l))),
            allowed,
            allowed_start,
            allowed_end,
        }
    }

    /// Mask derived from the scheme's well-formedness rules.
    pub fn for_scheme(scheme: Scheme) -> Self {
        let labels = scheme.labels();
        let l = labels.len();
        let allowed = Array2::from_shape_fn((l, l), |(i, j)| scheme.allowed_transition(labels[i], labels[j]));
        let start = labels.iter().map(|&t| scheme.allowed_start(t)).collect();
        let end = labels.iter().map(|&t| scheme.allowed_end(t)).collect();
        Self::with_mask(allowed, start, end)
    }

    /// Replaces all scores with uniform noise; used by tests.
    pub fn randomize<R: Rng>(&mut self, scale: f64, rng: &mut R) {
        let l = self.num_labels();
        self.transitions.value = init_uniform(l, l, 1, rng) * scale;
        self.start.value = init_uniform(1, l, 1, rng) * scale;
        self.end.value = init_uniform(1, l, 1, rng) * scale;
    }

    pub fn num_labels(&self) -> usize {
        self.allowed.nrows()
    }

    pub fn is_allowed(&self, from: usize, to: usize) -> bool {
        self.allowed[(from, to)]
    }

    fn trans(&self, i: usize, j: usize) -> f64 {
        if self.allowed[(i, j)] {
            self.transitions.value[(i, j)]
        } else {
            f64::NEG_INFINITY
        }
    }

    fn start_score(&self, j: usize) -> f64 {
        if self.allowed_start[j] {
            self.start.value[(0, j)]
        } else {
            f64::NEG_INFINITY
        }
    }

    fn end_score(&self, j: usize) -> f64 {
        if self.allowed_end[j] {
            self.end.value[(0, j)]
        } else {
            f64::NEG_INFINITY
        }
    }

    fn check_width(&self, emissions: &Array2<f64>) -> Result<(), CrfError> {
        if emissions.ncols() != self.num_labels() {
            return Err(CrfError::Width {
                got: emissions.ncols(),
                expected: self.num_labels(),
            });
        }
        Ok(())
    }

    /// Score of one path; `-inf` if it breaks the mask.
    pub fn path_score(&self, emissions: &Array2<f64>, path: &[usize]) -> f64 {
        assert_eq!(emissions.nrows(), path.len());
        let Some((&first, &last)) = path.first().zip(path.last()) else {
            return 0.0;
        };
        let mut score = self.start_score(first) + self.end_score(last);
        for (t, &y) in path.iter().enumerate() {
            score += emissions[(t, y)];
            if t > 0 {
                score += self.trans(path[t - 1], y);
            }
        }
        score
    }

    /// Forward log-potentials `alpha[t, j]`: log-sum over prefixes ending in `j`.
    fn forward_table(&self, emissions: &Array2<f64>) -> Array2<f64> {
        let (n, l) = emissions.dim();
        let mut alpha = Array2::from_elem((n, l), f64::NEG_INFINITY);
        for j in 0..l {
            alpha[(0, j)] = self.start_score(j) + emissions[(0, j)];
        }
        for t in 1..n {
            for j in 0..l {
                let prev = (0..l).map(|i| alpha[(t - 1, i)] + self.trans(i, j));
                alpha[(t, j)] = log_sum_exp(prev) + emissions[(t, j)];
            }
        }
        alpha
    }

    fn backward_table(&self, emissions: &Array2<f64>) -> Array2<f64> {
        let (n, l) = emissions.dim();
        let mut beta = Array2::from_elem((n, l), f64::NEG_INFINITY);
        for i in 0..l {
            beta[(n - 1, i)] = self.end_score(i);
        }
        for t in (0..n - 1).rev() {
            for i in 0..l {
                let next = (0..l).map(|j| self.trans(i, j) + emissions[(t + 1, j)] + beta[(t + 1, j)]);
                beta[(t, i)] = log_sum_exp(next);
            }
        }
        beta
    }

    /// `log sum_y exp(score(y))`; zero for an empty sequence.
    pub fn log_partition(&self, emissions: &Array2<f64>) -> f64 {
        let n = emissions.nrows();
        if n == 0 {
            return 0.0;
        }
        let alpha = self.forward_table(emissions);
        log_sum_exp((0..self.num_labels()).map(|j| alpha[(n - 1, j)] + self.end_score(j)))
    }

    /// Negative log-likelihood of `gold`. Accumulates parameter gradients and
    /// returns the loss with its gradient w.r.t. the emissions.
    pub fn nll(&mut self, emissions: &Array2<f64>, gold: &[usize]) -> Result<(f64, Array2<f64>), CrfError> {
        self.check_width(emissions)?;
        let (n, l) = emissions.dim();
        if gold.len() != n {
            return Err(CrfError::Length {
                tags: gold.len(),
                tokens: n,
            });
        }
        let mut d_emit = Array2::zeros((n, l));
        if n == 0 {
            return Ok((0.0, d_emit));
        }
        if !self.allowed_start[gold[0]] {
            return Err(CrfError::ForbiddenGold(0));
        }
        if !self.allowed_end[gold[n - 1]] {
            return Err(CrfError::ForbiddenGold(n - 1));
        }
        if let Some(t) = (1..n).find(|&t| !self.allowed[(gold[t - 1], gold[t])]) {
            return Err(CrfError::ForbiddenGold(t));
        }
        let alpha = self.forward_table(emissions);
        let beta = self.backward_table(emissions);
        let log_z = log_sum_exp((0..l).map(|j| alpha[(n - 1, j)] + self.end_score(j)));
        let loss = log_z - self.path_score(emissions, gold);

        for t in 0..n {
            for j in 0..l {
                d_emit[(t, j)] = (alpha[(t, j)] + beta[(t, j)] - log_z).exp();
            }
            d_emit[(t, gold[t])] -= 1.0;
        }
        for j in 0..l {
            self.start.grad[(0, j)] += (alpha[(0, j)] + beta[(0, j)] - log_z).exp();
            self.end.grad[(0, j)] += (alpha[(n - 1, j)] + beta[(n - 1, j)] - log_z).exp();
        }
        self.start.grad[(0, gold[0])] -= 1.0;
        self.end.grad[(0, gold[n - 1])] -= 1.0;
        for t in 1..n {
            for i in 0..l {
                for j in 0..l {
                    if self.allowed[(i, j)] {
                        let lp = alpha[(t - 1, i)] + self.trans(i, j) + emissions[(t, j)] + beta[(t, j)] - log_z;
                        self.transitions.grad[(i, j)] += lp.exp();
                    }
                }
            }
            self.transitions.grad[(gold[t - 1], gold[t])] -= 1.0;
        }
        Ok((loss, d_emit))
    }

    /// Best path under the mask. Among equal scores the lower label index wins,
    /// both for the final label and for each back-pointer.
    pub fn viterbi(&self, emissions: &Array2<f64>) -> Vec<usize> {
        let (n, l) = emissions.dim();
        if n == 0 {
            return Vec::new();
        }
        let mut delta = Array1::from_shape_fn(l, |j| self.start_score(j) + emissions[(0, j)]);
        let mut back = Array2::<usize>::zeros((n, l));
        for t in 1..n {
            let mut next = Array1::from_elem(l, f64::NEG_INFINITY);
            for j in 0..l {
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for i in 0..l {
                    let s = delta[i] + self.trans(i, j);
                    if s > best_score {
                        best = i;
                        best_score = s;
                    }
                }
                back[(t, j)] = best;
                next[j] = best_score + emissions[(t, j)];
            }
            delta = next;
        }
        let mut last = 0;
        let mut best_score = f64::NEG_INFINITY;
        for j in 0..l {
            let s = delta[j] + self.end_score(j);
            if s > best_score {
                last = j;
                best_score = s;
            }
        }
        let mut path = vec![last; n];
        for t in (1..n).rev() {
            path[t - 1] = back[(t, path[t])];
        }
        path
    }
}

impl Module for Crf {
    fn params(&self) -> Vec<&Param> {
        vec![&self.transitions, &self.start, &self.end]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.transitions, &mut self.start, &mut self.end]
    }
}
