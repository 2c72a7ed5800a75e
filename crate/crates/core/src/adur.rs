//! ADU recognition: frozen token features, a BiLSTM, a linear emission layer
//! and a constrained CRF.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::AdurConfig;
use crate::corpus::AduSpan;
use crate::crf::{Crf, CrfError};
use crate::data::{Example, PreparedSection};
use crate::eval::{token_counts, ScoreReport};
use crate::nn::checkpoint::{Checkpoint, CheckpointError};
use crate::nn::{BiLstm, BiLstmCache, Dropout, Linear, Module, Param};
use crate::tagging::{decode_token_spans, token_spans_to_adus, TagSequence, TokenSpan};
use crate::train::{cross_validate, fit, length_grouped_batches, scale_grads, CvResult, Diverged, FitOptions, Trained};

pub const CHECKPOINT_KIND: &str = "adur";

#[derive(Debug, thiserror::Error)]
pub enum AdurError {
    #[error("feature width {got} does not match the model's {expected}")]
    FeatureWidth { expected: usize, got: usize },
    #[error("{section}: {rows} feature rows for {tokens} tokens")]
    FeatureRows { section: String, rows: usize, tokens: usize },
    #[error("no training sections")]
    NoTrainingData,
    #[error("no dev sections")]
    NoDevData,
    #[error(transparent)]
    Crf(#[from] CrfError),
    #[error(transparent)]
    Diverged(#[from] Box<Diverged<AdurModel>>),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdurModel {
    pub config: AdurConfig,
    pub embed_dim: usize,
    pub lstm: BiLstm,
    pub emit: Linear,
    pub crf: Crf,
}

pub struct AdurCache {
    mask_in: Option<Array2<f64>>,
    lstm: BiLstmCache,
    mask_out: Option<Array2<f64>>,
    hidden: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    kind: String,
    embed_dim: usize,
    config: AdurConfig,
}

impl AdurModel {
    pub fn new(config: &AdurConfig, embed_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let lstm = BiLstm::new("adur.lstm", embed_dim, config.lstm_hidden, config.lstm_layers, config.dropout_lstm, rng);
        let labels = config.scheme.num_labels();
        let emit = Linear::new("adur.emit", lstm.output_dim(), labels, rng);
        let crf = Crf::for_scheme(config.scheme);
        Self {
            config: config.clone(),
            embed_dim,
            lstm,
            emit,
            crf,
        }
    }

    fn check(&self, x: &Array2<f64>) -> Result<(), AdurError> {
        if x.ncols() != self.embed_dim {
            return Err(AdurError::FeatureWidth {
                expected: self.embed_dim,
                got: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &Array2<f64>, train: bool, rng: &mut ChaCha8Rng) -> (Array2<f64>, AdurCache) {
        let drop = Dropout::new(self.config.dropout_io);
        let (x, mask_in) = drop.forward(x, train, rng);
        let (h, lstm) = self.lstm.forward(&x, train, rng);
        let (hidden, mask_out) = drop.forward(&h, train, rng);
        let emissions = self.emit.forward(&hidden);
        (
            emissions,
            AdurCache {
                mask_in,
                lstm,
                mask_out,
                hidden,
            },
        )
    }

    /// Gradient of the emission scores back to the input features.
    pub fn backward(&mut self, cache: &AdurCache, d_emissions: &Array2<f64>) -> Array2<f64> {
        let dh = self.emit.backward(&cache.hidden, d_emissions);
        let dh = Dropout::backward(cache.mask_out.as_ref(), dh);
        let dx = self.lstm.backward(&cache.lstm, &dh);
        Dropout::backward(cache.mask_in.as_ref(), dx)
    }

    /// CRF negative log-likelihood of `gold`; accumulates gradients.
    pub fn loss_backward(&mut self, x: &Array2<f64>, gold: &[usize], rng: &mut ChaCha8Rng) -> Result<f64, AdurError> {
        self.check(x)?;
        if x.nrows() == 0 {
            return Ok(0.0);
        }
        let (emissions, cache) = self.forward(x, true, rng);
        let (loss, d_emissions) = self.crf.nll(&emissions, gold)?;
        self.backward(&cache, &d_emissions);
        Ok(loss)
    }

    pub fn emissions(&self, x: &Array2<f64>) -> Result<Array2<f64>, AdurError> {
        self.check(x)?;
        // no randomness is consumed outside training
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward(x, false, &mut rng).0)
    }

    pub fn decode(&self, x: &Array2<f64>) -> Result<TagSequence, AdurError> {
        if x.nrows() == 0 {
            self.check(x)?;
            return Ok(TagSequence {
                scheme: self.config.scheme,
                tags: Vec::new(),
            });
        }
        let path = self.crf.viterbi(&self.emissions(x)?);
        Ok(TagSequence::from_indices(self.config.scheme, &path))
    }

    pub fn predict_token_spans(&self, x: &Array2<f64>) -> Result<Vec<TokenSpan>, AdurError> {
        Ok(decode_token_spans(&self.decode(x)?.tags))
    }

    /// Predicted ADU fragments with character offsets, named `{id_prefix}{n}`.
    pub fn predict(&self, section: &PreparedSection, x: &Array2<f64>, id_prefix: &str) -> Result<Vec<AduSpan>, AdurError> {
        check_rows(section, x)?;
        let spans = self.predict_token_spans(x)?;
        Ok(token_spans_to_adus(&spans, &section.tokens, id_prefix))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = Meta {
            kind: CHECKPOINT_KIND.to_string(),
            embed_dim: self.embed_dim,
            config: self.config.clone(),
        };
        Checkpoint::from_module(serde_json::to_string(&meta).expect("config serializes"), self)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, AdurError> {
        let meta: Meta = serde_json::from_str(&ckpt.meta).map_err(|e| CheckpointError::Malformed(format!("metadata: {e}")))?;
        if meta.kind != CHECKPOINT_KIND {
            return Err(CheckpointError::Malformed(format!("expected a `{CHECKPOINT_KIND}` checkpoint, found `{}`", meta.kind)).into());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = Self::new(&meta.config, meta.embed_dim, &mut rng);
        ckpt.restore_into(&mut model)?;
        Ok(model)
    }
}

impl Module for AdurModel {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.lstm.params();
        p.extend(self.emit.params());
        p.extend(self.crf.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.lstm.params_mut();
        p.extend(self.emit.params_mut());
        p.extend(self.crf.params_mut());
        p
    }
}

fn check_rows(section: &PreparedSection, x: &Array2<f64>) -> Result<(), AdurError> {
    if x.nrows() != section.len() {
        return Err(AdurError::FeatureRows {
            section: section.key.to_string(),
            rows: x.nrows(),
            tokens: section.len(),
        });
    }
    Ok(())
}

/// Token macro-F1 over the three ADU classes, outside tokens excluded.
pub fn token_macro_f1(model: &AdurModel, examples: &[Example<'_>]) -> Result<f64, AdurError> {
    let mut total = crate::eval::ClassCounts::new();
    for ex in examples {
        check_rows(ex.section, ex.features)?;
        let gold: Vec<_> = ex.section.gold_tags(model.config.scheme).tags.iter().map(|t| t.adu_type()).collect();
        let pred: Vec<_> = model.decode(ex.features)?.tags.iter().map(|t| t.adu_type()).collect();
        let counts = token_counts(&gold, &pred, false).expect("lengths checked");
        crate::eval::merge_counts(&mut total, &counts);
    }
    Ok(ScoreReport::from_counts(&total).macro_f1)
}

/// Trains one model, early-stopping on dev token macro-F1.
pub fn train_adur(train: &[Example<'_>], dev: &[Example<'_>], config: &AdurConfig) -> Result<Trained<AdurModel>, AdurError> {
    let train: Vec<&Example<'_>> = train.iter().filter(|e| !e.section.is_empty()).collect();
    let first = train.first().ok_or(AdurError::NoTrainingData)?;
    if dev.is_empty() {
        return Err(AdurError::NoDevData);
    }
    let embed_dim = first.features.ncols();
    let mut golds = Vec::with_capacity(train.len());
    for ex in &train {
        check_rows(ex.section, ex.features)?;
        if ex.features.ncols() != embed_dim {
            return Err(AdurError::FeatureWidth {
                expected: embed_dim,
                got: ex.features.ncols(),
            });
        }
        golds.push(ex.section.gold_tags(config.scheme).indices());
    }
    for ex in dev {
        check_rows(ex.section, ex.features)?;
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ad0e);
    let model = AdurModel::new(config, embed_dim, &mut init_rng);
    let lengths: Vec<usize> = train.iter().map(|e| e.section.len()).collect();
    let opts = FitOptions {
        lr: config.lr,
        grad_clip: config.grad_clip,
        patience: config.patience,
        max_epochs: config.max_epochs,
        seed: config.seed,
    };
    let mut dev_error = None;
    let result = fit(
        model,
        &opts,
        |rng| length_grouped_batches(&lengths, config.batch_size, rng),
        |m, batch, rng| {
            let mut loss = 0.0;
            let mut tokens = 0usize;
            for &i in batch {
                loss += m.loss_backward(train[i].features, &golds[i], rng).map_err(|e| e.to_string())?;
                tokens += lengths[i];
            }
            let norm = 1.0 / tokens.max(1) as f64;
            scale_grads(m, norm);
            Ok(loss * norm)
        },
        |m| match token_macro_f1(m, dev) {
            Ok(f) => f,
            Err(e) => {
                dev_error.get_or_insert(e);
                f64::NAN
            }
        },
    );
    if let Some(e) = dev_error {
        return Err(e);
    }
    result.map_err(|d| AdurError::Diverged(Box::new(d)))
}

/// k-fold cross-validation over whole documents; fold `i` trains with seed
/// `config.seed + i`. Returns the fold model with the best dev score.
pub fn cross_validate_adur(examples: &[Example<'_>], config: &AdurConfig) -> Result<CvResult<AdurModel>, AdurError> {
    cross_validate(examples, config.folds, |train, dev, fold| {
        let mut cfg = config.clone();
        cfg.seed = config.seed + fold as u64;
        train_adur(train, dev, &cfg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AduType, Section};
    use crate::data::{embed_section, examples};
    use crate::embed::HashEmbedder;
    use crate::nn::gradcheck::{numeric_input_grad, numeric_param_grad, relative_error};
    use crate::tagging::Scheme;

    fn tiny_config() -> AdurConfig {
        AdurConfig {
            lstm_hidden: 8,
            lstm_layers: 1,
            dropout_io: 0.0,
            dropout_lstm: 0.0,
            lr: 0.02,
            batch_size: 4,
            max_epochs: 60,
            patience: 60,
            ..AdurConfig::default()
        }
    }

    fn section(doc: &str, index: usize, words: &[(&str, Option<AduType>)]) -> Section {
        let mut text = String::new();
        let mut adus = Vec::new();
        for (i, (w, t)) in words.iter().enumerate() {
            if !text.is_empty() {
                text.push(' ');
            }
            let start = text.chars().count();
            text.push_str(w);
            if let Some(t) = t {
                adus.push(AduSpan::new(format!("T{i}"), *t, start, text.chars().count()));
            }
        }
        Section {
            doc_id: doc.into(),
            index,
            char_start: 0,
            char_end: text.chars().count(),
            text,
            adus,
            relations: Vec::new(),
        }
    }

    fn corpus() -> Vec<PreparedSection> {
        use AduType::*;
        let mut out = Vec::new();
        for i in 0..10 {
            let words: Vec<(&str, Option<AduType>)> = vec![
                ("the", None),
                (["alpha", "beta", "gamma"][i % 3], Some([OwnClaim, Data, BackgroundClaim][i % 3])),
                ("and", None),
                (["delta", "beta", "alpha"][i % 3], Some([BackgroundClaim, Data, OwnClaim][i % 3])),
                ("end", None),
            ];
            out.push(PreparedSection::new(&section(&format!("D{}", i / 2), i % 2, &words)));
        }
        out
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = tiny_config();
        let mut model = AdurModel::new(&cfg, 4, &mut rng);
        model.crf.randomize(0.5, &mut rng);
        let x = crate::nn::init_normal(5, 4, &mut rng);
        let gold = TagSequence {
            scheme: Scheme::Bioul,
            tags: crate::tagging::encode_token_spans(5, &[TokenSpan::new(1, 3, AduType::Data)], Scheme::Bioul).tags,
        }
        .indices();
        model.zero_grad();
        let (emissions, cache) = model.forward(&x, false, &mut rng);
        let (_, de) = model.crf.nll(&emissions, &gold).unwrap();
        let dx = model.backward(&cache, &de);
        let loss = |m: &AdurModel, x: &Array2<f64>| {
            let mut m = m.clone();
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let (e, _) = m.forward(x, false, &mut r);
            m.crf.nll(&e, &gold).unwrap().0
        };
        let n = model.params().len();
        for i in 0..n {
            let numeric = numeric_param_grad(&mut model, i, |m| loss(m, &x));
            let analytic = &model.params()[i].grad;
            assert!(relative_error(analytic, &numeric) < 1e-4, "param {}", model.params()[i].name);
        }
        let numeric = numeric_input_grad(&x, |x| loss(&model, x));
        assert!(relative_error(&dx, &numeric) < 1e-4);
    }

    #[test]
    fn empty_section_predicts_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = AdurModel::new(&tiny_config(), 4, &mut rng);
        let s = PreparedSection::new(&section("D", 0, &[]));
        let x = Array2::zeros((0, 4));
        assert!(model.predict(&s, &x, "T").unwrap().is_empty());
    }

    #[test]
    fn wrong_width_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = AdurModel::new(&tiny_config(), 4, &mut rng);
        assert!(matches!(model.decode(&Array2::zeros((3, 5))), Err(AdurError::FeatureWidth { .. })));
    }

    #[test]
    fn piecewise_embedding_gives_same_spans() {
        let sections = corpus();
        let direct = HashEmbedder::new(16, 1);
        let piecewise = HashEmbedder {
            max_len: 2,
            ..direct
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = AdurModel::new(&tiny_config(), 16, &mut rng);
        for s in &sections {
            let a = embed_section(&direct, s).unwrap();
            let b = embed_section(&piecewise, s).unwrap();
            assert_eq!(a, b);
            assert_eq!(model.predict(s, &a, "T").unwrap(), model.predict(s, &b, "T").unwrap());
        }
    }

    #[test]
    fn overfits_marker_corpus_deterministically() {
        let sections = corpus();
        let embedder = HashEmbedder::new(16, 7);
        let feats: Vec<Array2<f64>> = sections.iter().map(|s| embed_section(&embedder, s).unwrap()).collect();
        let before = feats.clone();
        let ex = examples(&sections, &feats);
        let cfg = tiny_config();
        let a = train_adur(&ex, &ex, &cfg).unwrap();
        assert!(a.log.best_dev_score >= 0.95, "dev F1 {}", a.log.best_dev_score);
        let b = train_adur(&ex, &ex, &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.model, b.model);
        // frozen features stay bitwise identical
        let again: Vec<Array2<f64>> = sections.iter().map(|s| embed_section(&embedder, s).unwrap()).collect();
        assert_eq!(before, again);
        assert_eq!(feats, again);
        // best checkpoint carries the best observed score
        let best = a.log.epochs.iter().map(|e| e.dev_score).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(token_macro_f1(&a.model, &ex).unwrap(), best);
        for s in &sections {
            let x = embed_section(&embedder, s).unwrap();
            let pred = a.model.predict(s, &x, "T").unwrap();
            let got: Vec<_> = pred.iter().map(|p| (p.adu_type, p.start, p.end)).collect();
            let want: Vec<_> = s.adus.iter().map(|p| (p.adu_type, p.start, p.end)).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut cfg = tiny_config();
        cfg.scheme = Scheme::Bio2;
        let model = AdurModel::new(&cfg, 6, &mut rng);
        let bytes = model.to_checkpoint().to_bytes();
        let restored = AdurModel::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(restored.config, cfg);
        for (a, b) in model.params().iter().zip(restored.params()) {
            assert_eq!(a.value.mapv(|v| v as f32 as f64), b.value);
        }
        let x = crate::nn::init_normal(7, 6, &mut rng);
        assert_eq!(restored.to_checkpoint().to_bytes(), bytes);
        assert!(restored.decode(&x).unwrap().is_valid());
    }

    #[test]
    fn cross_validation_picks_best_fold() {
        let sections = corpus();
        let embedder = HashEmbedder::new(8, 2);
        let feats: Vec<Array2<f64>> = sections.iter().map(|s| embed_section(&embedder, s).unwrap()).collect();
        let ex = examples(&sections, &feats);
        let mut cfg = tiny_config();
        cfg.folds = 3;
        cfg.max_epochs = 3;
        let cv = cross_validate_adur(&ex, &cfg).unwrap();
        assert_eq!(cv.fold_scores.len(), 3);
        let max = cv.fold_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(cv.fold_scores[cv.best_fold], max);
        assert_eq!(cv.best.log.seed, cfg.seed + cv.best_fold as u64);
    }
}
