use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng;

use super::{Linear, Module, Param};

/// 1-D convolutions over the time axis followed by ReLU and max-over-time
/// pooling, one filter bank per n-gram size. Output is `[1 x filters * sizes]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnMaxPool {
    pub sizes: Vec<usize>,
    pub banks: Vec<Linear>,
}

#[derive(Debug, Clone)]
pub struct CnnCache {
    len: usize,
    windows: Vec<Array2<f64>>,
    /// Winning window per filter, `None` if ReLU clipped it.
    argmax: Vec<Vec<Option<usize>>>,
}

fn unfold(x: &Array2<f64>, size: usize) -> Array2<f64> {
    let (n, d) = x.dim();
    let padded_len = n.max(size);
    let mut padded = Array2::zeros((padded_len, d));
    padded.slice_mut(s![..n, ..]).assign(x);
    let count = padded_len - size + 1;
    let mut out = Array2::zeros((count, size * d));
    for w in 0..count {
        for k in 0..size {
            out.slice_mut(s![w, k * d..(k + 1) * d]).assign(&padded.row(w + k));
        }
    }
    out
}

impl CnnMaxPool {
    pub fn new<R: Rng>(name: &str, d_in: usize, filters: usize, sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.iter().all(|&s| s > 0), "n-gram sizes must be positive");
        let banks = sizes
            .iter()
            .map(|&s| Linear::new(&format!("{name}.conv{s}"), s * d_in, filters, rng))
            .collect();
        Self {
            sizes: sizes.to_vec(),
            banks,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.banks.iter().map(Linear::d_out).sum()
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, CnnCache) {
        let mut pooled = Vec::with_capacity(self.sizes.len());
        let mut windows = Vec::with_capacity(self.sizes.len());
        let mut argmax = Vec::with_capacity(self.sizes.len());
        for (&size, bank) in self.sizes.iter().zip(&self.banks) {
            let win = unfold(x, size);
            let act = bank.forward(&win);
            let mut out = Array2::zeros((1, bank.d_out()));
            let mut arg = Vec::with_capacity(bank.d_out());
            for (f, col) in act.columns().into_iter().enumerate() {
                let mut best = 0;
                for (w, &v) in col.iter().enumerate() {
                    if v > col[best] {
                        best = w;
                    }
                }
                if col[best] > 0.0 {
                    out[(0, f)] = col[best];
                    arg.push(Some(best));
                } else {
                    arg.push(None);
                }
            }
            pooled.push(out);
            windows.push(win);
            argmax.push(arg);
        }
        let views: Vec<_> = pooled.iter().map(|p| p.view()).collect();
        let out = concatenate(Axis(1), &views).expect("pooled rows share one row");
        (
            out,
            CnnCache {
                len: x.nrows(),
                windows,
                argmax,
            },
        )
    }

    pub fn backward(&mut self, cache: &CnnCache, d_out: &Array2<f64>) -> Array2<f64> {
        let mut offset = 0;
        let mut dx: Option<Array2<f64>> = None;
        for (b, (&size, bank)) in self.sizes.iter().zip(self.banks.iter_mut()).enumerate() {
            let filters = bank.d_out();
            let win = &cache.windows[b];
            let mut d_act = Array2::zeros((win.nrows(), filters));
            for (f, arg) in cache.argmax[b].iter().enumerate() {
                if let Some(w) = arg {
                    d_act[(*w, f)] = d_out[(0, offset + f)];
                }
            }
            offset += filters;
            let d_win = bank.backward(win, &d_act);
            let d = d_win.ncols() / size;
            let acc = dx.get_or_insert_with(|| Array2::zeros((cache.len, d)));
            for w in 0..d_win.nrows() {
                for k in 0..size {
                    let t = w + k;
                    if t < cache.len {
                        let mut row = acc.row_mut(t);
                        row += &d_win.slice(s![w, k * d..(k + 1) * d]);
                    }
                }
            }
        }
        dx.expect("at least one n-gram size")
    }
}

impl Module for CnnMaxPool {
    fn params(&self) -> Vec<&Param> {
        self.banks.iter().flat_map(|b| b.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.banks.iter_mut().flat_map(|b| b.params_mut()).collect()
    }
}
