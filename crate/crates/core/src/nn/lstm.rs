use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;

use super::{init_uniform, sigmoid, Dropout, Module, Param};

/// One LSTM direction. Gate blocks along the `4h` axis are ordered
/// input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub w_x: Param,
    pub w_h: Param,
    pub bias: Param,
    pub reverse: bool,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    /// Activated gates per time step `[n x 4h]`.
    gates: Array2<f64>,
    cells: Array2<f64>,
    tanh_cells: Array2<f64>,
    hidden: Array2<f64>,
}

impl Lstm {
    pub fn new<R: Rng>(name: &str, d_in: usize, hidden: usize, reverse: bool, rng: &mut R) -> Self {
        let mut bias = Array2::zeros((1, 4 * hidden));
        bias.slice_mut(s![.., hidden..2 * hidden]).fill(1.0);
        Self {
            w_x: Param::new(format!("{name}.w_x"), init_uniform(d_in, 4 * hidden, d_in, rng)),
            w_h: Param::new(format!("{name}.w_h"), init_uniform(hidden, 4 * hidden, hidden, rng)),
            bias: Param::new(format!("{name}.bias"), bias),
            reverse,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.value.nrows()
    }

    fn order(&self, n: usize) -> Vec<usize> {
        if self.reverse {
            (0..n).rev().collect()
        } else {
            (0..n).collect()
        }
    }

    /// Hidden states `[n x h]`, row `t` aligned with input row `t`.
    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, LstmCache) {
        let n = x.nrows();
        let h = self.hidden();
        let projected = x.dot(&self.w_x.value) + &self.bias.value;
        let mut gates = Array2::zeros((n, 4 * h));
        let mut cells = Array2::zeros((n, h));
        let mut tanh_cells = Array2::zeros((n, h));
        let mut hidden = Array2::zeros((n, h));
        let mut h_prev = Array1::<f64>::zeros(h);
        let mut c_prev = Array1::<f64>::zeros(h);
        for t in self.order(n) {
            let z = &projected.row(t) + &h_prev.dot(&self.w_h.value);
            let mut g = gates.row_mut(t);
            for k in 0..h {
                let i = sigmoid(z[k]);
                let f = sigmoid(z[h + k]);
                let gg = z[2 * h + k].tanh();
                let o = sigmoid(z[3 * h + k]);
                let c = f * c_prev[k] + i * gg;
                let tc = c.tanh();
                g[k] = i;
                g[h + k] = f;
                g[2 * h + k] = gg;
                g[3 * h + k] = o;
                cells[(t, k)] = c;
                tanh_cells[(t, k)] = tc;
                hidden[(t, k)] = o * tc;
            }
            h_prev = hidden.row(t).to_owned();
            c_prev = cells.row(t).to_owned();
        }
        let out = hidden.clone();
        (
            out,
            LstmCache {
                gates,
                cells,
                tanh_cells,
                hidden,
            },
        )
    }

    /// Backpropagation through time; returns `d loss / d x`.
    pub fn backward(&mut self, x: &Array2<f64>, cache: &LstmCache, d_out: &Array2<f64>) -> Array2<f64> {
        let n = x.nrows();
        let h = self.hidden();
        let order = self.order(n);
        let mut dz_all = Array2::<f64>::zeros((n, 4 * h));
        let mut h_prev_all = Array2::<f64>::zeros((n, h));
        let mut dh_next = Array1::<f64>::zeros(h);
        let mut dc_next = Array1::<f64>::zeros(h);
        for (step, &t) in order.iter().enumerate().rev() {
            let prev = step.checked_sub(1).map(|p| order[p]);
            if let Some(p) = prev {
                h_prev_all.row_mut(t).assign(&cache.hidden.row(p));
            }
            let g = cache.gates.row(t);
            let mut dz = dz_all.row_mut(t);
            for k in 0..h {
                let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let tc = cache.tanh_cells[(t, k)];
                let c_prev = prev.map_or(0.0, |p| cache.cells[(p, k)]);
                let dh = d_out[(t, k)] + dh_next[k];
                let d_o = dh * tc;
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                dz[k] = dc * gg * i * (1.0 - i);
                dz[h + k] = dc * c_prev * f * (1.0 - f);
                dz[2 * h + k] = dc * i * (1.0 - gg * gg);
                dz[3 * h + k] = d_o * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            dh_next = self.w_h.value.dot(&dz_all.row(t));
        }
        self.w_x.grad += &x.t().dot(&dz_all);
        self.w_h.grad += &h_prev_all.t().dot(&dz_all);
        self.bias.grad += &dz_all.sum_axis(Axis(0)).insert_axis(Axis(0));
        dz_all.dot(&self.w_x.value.t())
    }
}

impl Module for Lstm {
    fn params(&self) -> Vec<&Param> {
        vec![&self.w_x, &self.w_h, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.bias]
    }
}

/// Stacked bidirectional LSTM; layer outputs are `[forward | backward]`.
/// Dropout is applied to the input of every layer above the first.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub layers: Vec<(Lstm, Lstm)>,
    pub dropout: Dropout,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    inputs: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    caches: Vec<(LstmCache, LstmCache)>,
}

impl BiLstm {
    pub fn new<R: Rng>(name: &str, d_in: usize, hidden: usize, layers: usize, dropout: f64, rng: &mut R) -> Self {
        assert!(layers >= 1, "need at least one LSTM layer");
        let layers = (0..layers)
            .map(|l| {
                let d = if l == 0 { d_in } else { 2 * hidden };
                (
                    Lstm::new(&format!("{name}.{l}.fwd"), d, hidden, false, rng),
                    Lstm::new(&format!("{name}.{l}.bwd"), d, hidden, true, rng),
                )
            })
            .collect();
        Self {
            layers,
            dropout: Dropout::new(dropout),
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.layers[0].0.hidden()
    }

    pub fn forward<R: Rng>(&self, x: &Array2<f64>, train: bool, rng: &mut R) -> (Array2<f64>, BiLstmCache) {
        let mut cache = BiLstmCache {
            inputs: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
            caches: Vec::with_capacity(self.layers.len()),
        };
        let mut current = x.clone();
        for (l, (fwd, bwd)) in self.layers.iter().enumerate() {
            let (input, mask) = if l == 0 {
                (current, None)
            } else {
                self.dropout.forward(&current, train, rng)
            };
            let (hf, cf) = fwd.forward(&input);
            let (hb, cb) = bwd.forward(&input);
            current = concatenate![Axis(1), hf, hb];
            cache.inputs.push(input);
            cache.masks.push(mask);
            cache.caches.push((cf, cb));
        }
        (current, cache)
    }

    pub fn backward(&mut self, cache: &BiLstmCache, d_out: &Array2<f64>) -> Array2<f64> {
        let mut grad = d_out.clone();
        for l in (0..self.layers.len()).rev() {
            let (fwd, bwd) = &mut self.layers[l];
            let h = fwd.hidden();
            let input = &cache.inputs[l];
            let (cf, cb) = &cache.caches[l];
            let dx_f = fwd.backward(input, cf, &grad.slice(s![.., ..h]).to_owned());
            let dx_b = bwd.backward(input, cb, &grad.slice(s![.., h..]).to_owned());
            grad = Dropout::backward(cache.masks[l].as_ref(), dx_f + dx_b);
        }
        grad
    }
}

impl Module for BiLstm {
    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|(f, b)| f.params().into_iter().chain(b.params())).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers
            .iter_mut()
            .flat_map(|(f, b)| f.params_mut().into_iter().chain(b.params_mut()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{assert_grad_close, numeric_input_grad, numeric_param_grad};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randomize_biases(m: &mut impl Module, rng: &mut ChaCha8Rng) {
        for p in m.params_mut() {
            if p.name.ends_with("bias") {
                p.value = init_uniform(1, p.value.ncols(), 1, rng);
            }
        }
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut lstm = BiLstm::new("l", 3, 4, 2, 0.0, &mut rng);
        for p in lstm.params_mut() {
            p.value.fill(0.0);
        }
        let x = init_uniform(5, 3, 1, &mut rng);
        let (out, _) = lstm.forward(&x, false, &mut rng);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_directions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fwd = Lstm::new("f", 3, 2, false, &mut rng);
        let mut bwd = fwd.clone();
        bwd.reverse = true;
        let x = init_uniform(1, 3, 1, &mut rng);
        assert_eq!(fwd.forward(&x).0, bwd.forward(&x).0);
    }

    #[test]
    fn bilstm_gradients_3x2() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut lstm = BiLstm::new("l", 2, 2, 2, 0.0, &mut rng);
        randomize_biases(&mut lstm, &mut rng);
        let x = init_uniform(3, 2, 1, &mut rng);
        let w = init_uniform(3, 4, 1, &mut rng);
        let loss = |m: &BiLstm, x: &Array2<f64>| {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            (m.forward(x, false, &mut r).0 * &w).sum()
        };
        let (_, cache) = lstm.forward(&x, false, &mut rng);
        let dx = lstm.backward(&cache, &w);
        for i in 0..lstm.params().len() {
            let num = numeric_param_grad(&mut lstm.clone(), i, |m| loss(m, &x));
            assert_grad_close(&lstm.params()[i].grad, &num, 1e-4);
        }
        assert_grad_close(&dx, &numeric_input_grad(&x, |xx| loss(&lstm, xx)), 1e-4);
    }

    #[test]
    fn gradients_with_dropout_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut lstm = BiLstm::new("l", 3, 2, 2, 0.4, &mut rng);
        let x = init_uniform(4, 3, 1, &mut rng);
        let w = init_uniform(4, 4, 1, &mut rng);
        let loss = |m: &BiLstm, x: &Array2<f64>| {
            let mut r = ChaCha8Rng::seed_from_u64(11);
            (m.forward(x, true, &mut r).0 * &w).sum()
        };
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let (_, cache) = lstm.forward(&x, true, &mut r);
        let dx = lstm.backward(&cache, &w);
        assert_grad_close(&dx, &numeric_input_grad(&x, |xx| loss(&lstm, xx)), 1e-4);
        let num = numeric_param_grad(&mut lstm.clone(), 3, |m| loss(m, &x));
        assert_grad_close(&lstm.params()[3].grad, &num, 1e-4);
    }
}
