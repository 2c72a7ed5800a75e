//! Shared training machinery: batching, early stopping, the optimisation
//! loop and document-level cross-validation folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::collections::HashMap;

use crate::corpus::SectionKey;
use crate::data::Example;
use crate::nn::{clip_grad_norm, Adam, Module};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Waiting,
    Stop,
}

/// Stops once `patience` epochs in a row fail to beat the best dev score.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        Self {
            patience,
            best: None,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> StopDecision {
        match self.best {
            Some((_, best)) if score <= best || score.is_nan() => {
                self.since_best += 1;
                if self.since_best >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Waiting
                }
            }
            _ => {
                self.best = Some((epoch, score));
                self.since_best = 0;
                StopDecision::Improved
            }
        }
    }

    /// `(epoch, score)` of the best observation so far.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

/// Indices sorted by length and cut into batches; the batch order is shuffled.
pub fn length_grouped_batches(lengths: &[usize], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| (lengths[i], i));
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    batches.shuffle(rng);
    batches
}

/// A random permutation cut into batches.
pub fn shuffled_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Multiplies every accumulated gradient by `factor`.
pub fn scale_grads(model: &mut impl Module, factor: f64) {
    for p in model.params_mut() {
        p.grad *= factor;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_score: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_dev_score: f64,
    pub stopped_epoch: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone)]
pub struct Trained<M> {
    pub model: M,
    pub log: TrainLog,
}

/// Training hit a non-finite loss or gradient. `last_good` holds the best
/// model seen before that point (the initial model if none was evaluated).
#[derive(Debug, Clone)]
pub struct Diverged<M> {
    pub epoch: usize,
    pub message: String,
    pub last_good: Box<Trained<M>>,
}

impl<M> std::fmt::Display for Diverged<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training diverged in epoch {}: {}", self.epoch, self.message)
    }
}

impl<M: std::fmt::Debug> std::error::Error for Diverged<M> {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub lr: f64,
    pub grad_clip: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

/// Runs the optimisation loop.
///
/// Each epoch asks `plan` for batches, calls `step` once per batch (which
/// must accumulate gradients, already normalised, and return the batch
/// loss), clips, applies Adam, then scores the model with `dev`. The
/// returned model is the best-scoring one.
pub fn fit<M, P, S, D>(mut model: M, opts: &FitOptions, mut plan: P, mut step: S, mut dev: D) -> Result<Trained<M>, Diverged<M>>
where
    M: Module + Clone,
    P: FnMut(&mut ChaCha8Rng) -> Vec<Vec<usize>>,
    S: FnMut(&mut M, &[usize], &mut ChaCha8Rng) -> Result<f64, String>,
    D: FnMut(&M) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = Adam::new(opts.lr);
    let mut stopper = EarlyStopping::new(opts.patience);
    let mut best = model.clone();
    let mut log = TrainLog {
        seed: opts.seed,
        epochs: Vec::new(),
        best_epoch: 0,
        best_dev_score: f64::NEG_INFINITY,
        stopped_epoch: 0,
        stop_reason: StopReason::MaxEpochs,
    };

    for epoch in 1..=opts.max_epochs {
        let batches = plan(&mut rng);
        let mut total = 0.0;
        for batch in &batches {
            model.zero_grad();
            let outcome = step(&mut model, batch, &mut rng).and_then(|loss| {
                if !loss.is_finite() {
                    return Err(format!("non-finite loss {loss}"));
                }
                let mut params = model.params_mut();
                clip_grad_norm(&mut params, opts.grad_clip).map_err(|e| e.to_string())?;
                adam.step(&mut params);
                Ok(loss)
            });
            match outcome {
                Ok(loss) => total += loss,
                Err(message) => {
                    log.stopped_epoch = epoch;
                    log.stop_reason = StopReason::Diverged;
                    log::error!("epoch {epoch}: {message}");
                    return Err(Diverged {
                        epoch,
                        message,
                        last_good: Box::new(Trained { model: best, log }),
                    });
                }
            }
        }
        let train_loss = total / batches.len().max(1) as f64;
        let dev_score = dev(&model);
        let decision = stopper.observe(epoch, dev_score);
        let improved = decision == StopDecision::Improved;
        if improved {
            best = model.clone();
            log.best_epoch = epoch;
            log.best_dev_score = dev_score;
        }
        log::info!("epoch {epoch}: loss {train_loss:.6} dev {dev_score:.4}{}", if improved { " *" } else { "" });
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            dev_score,
            improved,
        });
        log.stopped_epoch = epoch;
        if decision == StopDecision::Stop {
            log.stop_reason = StopReason::Patience;
            break;
        }
    }
    Ok(Trained { model: best, log })
}

/// Contiguous document blocks: fold `i` holds out block `i` as dev.
/// With `k == 1` every document is used for both training and dev.
pub fn fold_splits(n_docs: usize, k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    assert!(k >= 1, "need at least one fold");
    if k == 1 {
        let all: Vec<usize> = (0..n_docs).collect();
        return vec![(all.clone(), all)];
    }
    assert!(n_docs >= k, "{n_docs} documents cannot form {k} folds");
    let base = n_docs / k;
    let extra = n_docs % k;
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let dev: Vec<usize> = (start..start + len).collect();
            let train = (0..n_docs).filter(|d| !(start..start + len).contains(d)).collect();
            start += len;
            (train, dev)
        })
        .collect()
}

/// Item indices grouped by document, documents in order of first appearance.
pub fn group_by_document<'a>(keys: impl IntoIterator<Item = &'a SectionKey>) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, key) in keys.into_iter().enumerate() {
        let g = *index.entry(key.doc_id.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

/// Runs `run(fold)` for every fold on its own thread and returns the results in fold order.
pub fn run_folds<T, F>(k: usize, run: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..k).map(|fold| scope.spawn({ let run = &run; move || run(fold) })).collect();
        handles.into_iter().map(|h| h.join().expect("fold thread panicked")).collect()
    })
}

#[derive(Debug, Clone)]
pub struct CvResult<M> {
    pub best: Trained<M>,
    pub best_fold: usize,
    pub fold_scores: Vec<f64>,
}

/// Document-level k-fold cross-validation. `train(train, dev, fold)` runs on
/// its own thread per fold; the fold with the best dev score wins.
pub fn cross_validate<'a, M, E, F>(examples: &[Example<'a>], k: usize, train: F) -> Result<CvResult<M>, E>
where
    M: Send,
    E: Send,
    F: Fn(&[Example<'a>], &[Example<'a>], usize) -> Result<Trained<M>, E> + Sync,
{
    let groups = group_by_document(examples.iter().map(|e| &e.section.key));
    let folds = fold_splits(groups.len(), k);
    let pick = |docs: &[usize]| -> Vec<Example<'a>> { docs.iter().flat_map(|&d| groups[d].iter().map(|&i| examples[i])).collect() };
    let runs = run_folds(folds.len(), |fold| {
        let (train_docs, dev_docs) = &folds[fold];
        train(&pick(train_docs), &pick(dev_docs), fold)
    });
    let runs: Vec<Trained<M>> = runs.into_iter().collect::<Result<_, _>>()?;
    let fold_scores: Vec<f64> = runs.iter().map(|r| r.log.best_dev_score).collect();
    let best_fold = best_index(&fold_scores).expect("at least one fold");
    let best = runs.into_iter().nth(best_fold).expect("index in range");
    Ok(CvResult {
        best,
        best_fold,
        fold_scores,
    })
}

/// Index of the highest score; the earliest wins ties.
pub fn best_index(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Param;
    use ndarray::Array2;

    #[test]
    fn stops_patience_epochs_after_last_improvement() {
        let mut es = EarlyStopping::new(20);
        let k = 7;
        let mut stopped = None;
        for epoch in 1..=100 {
            let score = if epoch <= k { epoch as f64 } else { 0.0 };
            if es.observe(epoch, score) == StopDecision::Stop {
                stopped = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped, Some(k + 20));
        assert_eq!(es.best(), Some((k, k as f64)));
    }

    #[test]
    fn equal_score_is_not_improvement() {
        let mut es = EarlyStopping::new(2);
        assert_eq!(es.observe(1, 0.5), StopDecision::Improved);
        assert_eq!(es.observe(2, 0.5), StopDecision::Waiting);
        assert_eq!(es.observe(3, 0.5), StopDecision::Stop);
    }

    #[test]
    fn folds_partition_documents() {
        let folds = fold_splits(14, 5);
        let mut seen = vec![0; 14];
        for (train, dev) in &folds {
            assert_eq!(train.len() + dev.len(), 14);
            assert!(dev.windows(2).all(|w| w[1] == w[0] + 1));
            for &d in dev {
                seen[d] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(folds[0].1, vec![0, 1, 2]);
        assert_eq!(fold_splits(3, 1), vec![(vec![0, 1, 2], vec![0, 1, 2])]);
    }

    #[test]
    fn batches_cover_everything_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lengths = [5, 1, 9, 3, 3, 7, 2];
        let batches = length_grouped_batches(&lengths, 3, &mut rng);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        for b in &batches {
            let ls: Vec<usize> = b.iter().map(|&i| lengths[i]).collect();
            assert!(ls.windows(2).all(|w| w[0] <= w[1]));
        }
        assert_eq!(shuffled_batches(10, 4, &mut rng).len(), 3);
    }

    #[derive(Clone, Debug)]
    struct Quad(Param);

    impl Module for Quad {
        fn params(&self) -> Vec<&Param> {
            vec![&self.0]
        }
        fn params_mut(&mut self) -> Vec<&mut Param> {
            vec![&mut self.0]
        }
    }

    fn opts() -> FitOptions {
        FitOptions {
            lr: 0.1,
            grad_clip: 5.0,
            patience: 3,
            max_epochs: 200,
            seed: 4,
        }
    }

    #[test]
    fn fit_returns_best_and_is_deterministic() {
        let run = || {
            let model = Quad(Param::new("w", Array2::zeros((1, 1))));
            fit(
                model,
                &opts(),
                |rng| shuffled_batches(4, 2, rng),
                |m, _, _| {
                    let w = m.0.value[(0, 0)];
                    m.0.grad[(0, 0)] = 2.0 * (w - 1.0);
                    Ok((w - 1.0).powi(2))
                },
                |m| -(m.0.value[(0, 0)] - 1.0).abs(),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.log, b.log);
        let best = a.log.epochs.iter().map(|e| e.dev_score).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.log.best_dev_score, best);
        assert_eq!(-(a.model.0.value[(0, 0)] - 1.0).abs(), best);
    }

    #[test]
    fn divergence_returns_last_good() {
        let model = Quad(Param::new("w", Array2::zeros((1, 1))));
        let mut calls = 0;
        let err = fit(
            model,
            &opts(),
            |_| vec![vec![0]],
            |m, _, _| {
                calls += 1;
                m.0.grad[(0, 0)] = 1.0;
                Ok(if calls > 3 { f64::NAN } else { 1.0 })
            },
            |m| -m.0.value[(0, 0)].abs(),
        )
        .unwrap_err();
        assert_eq!(err.epoch, 4);
        assert_eq!(err.last_good.log.best_epoch, 1);
        assert_eq!(err.last_good.log.stop_reason, StopReason::Diverged);
    }
}
