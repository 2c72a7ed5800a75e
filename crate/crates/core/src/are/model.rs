use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AreError, AreLabel, Candidate};
use crate::config::AreConfig;
use crate::nn::checkpoint::{Checkpoint, CheckpointError};
use crate::nn::{softmax_cross_entropy, softmax_rows, BiLstm, BiLstmCache, CnnCache, CnnMaxPool, Dropout, Embedding, Linear, Module, Param};
use crate::tagging::{encode_token_spans, Scheme, TokenSpan};

pub const CHECKPOINT_KIND: &str = "are";

/// Argument tags: outside, then B/I for the head and for the tail.
pub const ARG_OUTSIDE: usize = 0;
pub const ARG_HEAD_BEGIN: usize = 1;
pub const ARG_HEAD_INSIDE: usize = 2;
pub const ARG_TAIL_BEGIN: usize = 3;
pub const ARG_TAIL_INSIDE: usize = 4;
pub const ARG_TAG_VOCAB: usize = 5;

/// ADU tags are always BIOUL-encoded for this channel.
pub const ADU_TAG_VOCAB: usize = 13;

/// BIOUL tag index per token for the given units.
pub fn adu_tag_ids(n_tokens: usize, spans: &[TokenSpan]) -> Vec<usize> {
    encode_token_spans(n_tokens, spans, Scheme::Bioul).indices()
}

/// Argument tag per window token.
pub fn arg_tag_ids(window: (usize, usize), head: &TokenSpan, tail: &TokenSpan) -> Vec<usize> {
    (window.0..window.1)
        .map(|i| {
            if (head.start..head.end).contains(&i) {
                if i == head.start {
                    ARG_HEAD_BEGIN
                } else {
                    ARG_HEAD_INSIDE
                }
            } else if (tail.start..tail.end).contains(&i) {
                if i == tail.start {
                    ARG_TAIL_BEGIN
                } else {
                    ARG_TAIL_INSIDE
                }
            } else {
                ARG_OUTSIDE
            }
        })
        .collect()
}

/// Everything needed to encode candidates of one section.
#[derive(Debug, Clone)]
pub struct SectionInput<'a> {
    pub features: &'a Array2<f64>,
    pub spans: Vec<TokenSpan>,
    pub adu_tags: Vec<usize>,
}

impl<'a> SectionInput<'a> {
    pub fn new(features: &'a Array2<f64>, spans: Vec<TokenSpan>) -> Self {
        let adu_tags = adu_tag_ids(features.nrows(), &spans);
        Self { features, spans, adu_tags }
    }
}

/// Window-level ids and frozen features of one candidate.
pub struct Encoded<'a> {
    pub tokens: ArrayView2<'a, f64>,
    pub adu_tags: Vec<usize>,
    pub arg_tags: Vec<usize>,
}

pub fn encode_candidate<'a>(input: &'a SectionInput<'_>, cand: &Candidate) -> Result<Encoded<'a>, AreError> {
    let (start, end) = cand.window;
    if start >= end || end > input.features.nrows() {
        return Err(AreError::EmptyWindow { start, end });
    }
    Ok(Encoded {
        tokens: input.features.slice(s![start..end, ..]),
        adu_tags: input.adu_tags[start..end].to_vec(),
        arg_tags: arg_tag_ids(cand.window, &input.spans[cand.head], &input.spans[cand.tail]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreModel {
    pub config: AreConfig,
    pub embed_dim: usize,
    pub adu_tags: Embedding,
    pub arg_tags: Embedding,
    pub lstm: BiLstm,
    pub cnn: CnnMaxPool,
    pub proj: Linear,
    pub out: Linear,
}

pub struct AreCache {
    adu_ids: Vec<usize>,
    arg_ids: Vec<usize>,
    mask_in: Option<Array2<f64>>,
    lstm: BiLstmCache,
    cnn: CnnCache,
    pooled: Array2<f64>,
    mask_proj: Option<Array2<f64>>,
    projected: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    kind: String,
    embed_dim: usize,
    config: AreConfig,
}

impl AreModel {
    pub fn new(config: &AreConfig, embed_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let adu_tags = Embedding::new("are.adu_tags", ADU_TAG_VOCAB, config.adu_tag_dim, rng);
        let arg_tags = Embedding::new("are.arg_tags", ARG_TAG_VOCAB, config.arg_tag_dim, rng);
        let d_in = embed_dim + config.adu_tag_dim + config.arg_tag_dim;
        let lstm = BiLstm::new("are.lstm", d_in, config.lstm_hidden, config.lstm_layers, config.dropout_lstm, rng);
        let cnn = CnnMaxPool::new("are.cnn", lstm.output_dim(), config.cnn_filters, &config.ngram_sizes, rng);
        let proj = Linear::new("are.proj", cnn.output_dim(), config.proj_hidden, rng);
        let out = Linear::new("are.out", config.proj_hidden, AreLabel::ALL.len(), rng);
        Self {
            config: config.clone(),
            embed_dim,
            adu_tags,
            arg_tags,
            lstm,
            cnn,
            proj,
            out,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.embed_dim + self.adu_tags.dim() + self.arg_tags.dim()
    }

    /// `[1 x 5]` logits for one encoded candidate.
    pub fn forward(&self, enc: &Encoded<'_>, train: bool, rng: &mut ChaCha8Rng) -> (Array2<f64>, AreCache) {
        let adu = self.adu_tags.forward(&enc.adu_tags);
        let arg = self.arg_tags.forward(&enc.arg_tags);
        let x = concatenate(Axis(1), &[enc.tokens, adu.view(), arg.view()]).expect("window rows agree");
        let drop = Dropout::new(self.config.dropout_io);
        let (x, mask_in) = drop.forward(&x, train, rng);
        let (h, lstm) = self.lstm.forward(&x, train, rng);
        let (pooled, cnn) = self.cnn.forward(&h);
        let p = self.proj.forward(&pooled);
        let (projected, mask_proj) = drop.forward(&p, train, rng);
        let logits = self.out.forward(&projected);
        (
            logits,
            AreCache {
                adu_ids: enc.adu_tags.clone(),
                arg_ids: enc.arg_tags.clone(),
                mask_in,
                lstm,
                cnn,
                pooled,
                mask_proj,
                projected,
            },
        )
    }

    /// Accumulates gradients; returns the gradient of the frozen token features.
    pub fn backward(&mut self, cache: &AreCache, d_logits: &Array2<f64>) -> Array2<f64> {
        let dp = self.out.backward(&cache.projected, d_logits);
        let dp = Dropout::backward(cache.mask_proj.as_ref(), dp);
        let dpooled = self.proj.backward(&cache.pooled, &dp);
        let dh = self.cnn.backward(&cache.cnn, &dpooled);
        let dx = self.lstm.backward(&cache.lstm, &dh);
        let dx = Dropout::backward(cache.mask_in.as_ref(), dx);
        let a = self.adu_tags.dim();
        let e = self.embed_dim;
        self.adu_tags.backward(&cache.adu_ids, &dx.slice(s![.., e..e + a]).to_owned());
        self.arg_tags.backward(&cache.arg_ids, &dx.slice(s![.., e + a..]).to_owned());
        dx.slice(s![.., ..e]).to_owned()
    }

    /// Cross-entropy of one candidate; accumulates gradients.
    pub fn loss_backward(&mut self, enc: &Encoded<'_>, label: AreLabel, rng: &mut ChaCha8Rng) -> f64 {
        let (logits, cache) = self.forward(enc, true, rng);
        let (loss, d_logits) = softmax_cross_entropy(&logits, &[label.index()]);
        self.backward(&cache, &d_logits);
        loss
    }

    /// Label distribution for one candidate.
    pub fn probabilities(&self, enc: &Encoded<'_>) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (logits, _) = self.forward(enc, false, &mut rng);
        softmax_rows(&logits).row(0).to_vec()
    }

    /// Highest-scoring label; ties go to the lower index.
    pub fn classify(&self, enc: &Encoded<'_>) -> AreLabel {
        let p = self.probabilities(enc);
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        AreLabel::from_index(best)
    }

    pub fn check_features(&self, features: &Array2<f64>) -> Result<(), AreError> {
        if features.ncols() != self.embed_dim {
            return Err(AreError::FeatureWidth {
                expected: self.embed_dim,
                got: features.ncols(),
            });
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = Meta {
            kind: CHECKPOINT_KIND.to_string(),
            embed_dim: self.embed_dim,
            config: self.config.clone(),
        };
        Checkpoint::from_module(serde_json::to_string(&meta).expect("config serializes"), self)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, AreError> {
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

impl Module for AreModel {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.adu_tags.params();
        p.extend(self.arg_tags.params());
        p.extend(self.lstm.params());
        p.extend(self.cnn.params());
        p.extend(self.proj.params());
        p.extend(self.out.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.adu_tags.params_mut();
        p.extend(self.arg_tags.params_mut());
        p.extend(self.lstm.params_mut());
        p.extend(self.cnn.params_mut());
        p.extend(self.proj.params_mut());
        p.extend(self.out.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AduType;
    use crate::nn::gradcheck::{numeric_input_grad, numeric_param_grad, relative_error};
    use crate::nn::init_normal;

    fn tiny() -> AreConfig {
        AreConfig {
            lstm_hidden: 4,
            lstm_layers: 1,
            cnn_filters: 3,
            ngram_sizes: vec![2, 3],
            proj_hidden: 5,
            adu_tag_dim: 2,
            arg_tag_dim: 2,
            dropout_io: 0.0,
            dropout_lstm: 0.0,
            window_k: 8,
            max_dist_d: 4,
            ..AreConfig::default()
        }
    }

    fn spans() -> Vec<TokenSpan> {
        vec![TokenSpan::new(1, 3, AduType::OwnClaim), TokenSpan::new(4, 5, AduType::Data)]
    }

    #[test]
    fn arg_tags_mark_head_and_tail() {
        let s = spans();
        assert_eq!(arg_tag_ids((0, 6), &s[0], &s[1]), vec![0, 1, 2, 0, 3, 0]);
        assert_eq!(arg_tag_ids((0, 6), &s[1], &s[0]), vec![0, 3, 4, 0, 1, 0]);
        assert_eq!(adu_tag_ids(6, &s).len(), 6);
    }

    #[test]
    fn shared_window_differs_only_in_arg_tags() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = init_normal(6, 3, &mut rng);
        let input = SectionInput::new(&x, spans());
        let a = encode_candidate(&input, &Candidate { head: 0, tail: 1, gap: 1, window: (0, 6) }).unwrap();
        let b = encode_candidate(&input, &Candidate { head: 1, tail: 0, gap: 1, window: (0, 6) }).unwrap();
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(a.adu_tags, b.adu_tags);
        assert_ne!(a.arg_tags, b.arg_tags);
        assert!(encode_candidate(&input, &Candidate { head: 0, tail: 1, gap: 1, window: (3, 3) }).is_err());
    }

    #[test]
    fn feature_width_and_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = AreConfig {
            adu_tag_dim: 13,
            arg_tag_dim: 3,
            ..tiny()
        };
        let model = AreModel::new(&cfg, 7, &mut rng);
        assert_eq!(model.input_dim(), 7 + 16);
        let x = init_normal(6, 7, &mut rng);
        let input = SectionInput::new(&x, spans());
        let enc = encode_candidate(&input, &Candidate { head: 0, tail: 1, gap: 1, window: (0, 6) }).unwrap();
        let p = model.probabilities(&enc);
        assert_eq!(p.len(), 5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = AreModel::new(&tiny(), 3, &mut rng);
        let x = init_normal(6, 3, &mut rng);
        let input = SectionInput::new(&x, spans());
        let cand = Candidate { head: 0, tail: 1, gap: 1, window: (0, 6) };
        let label = AreLabel::Contradicts;
        model.zero_grad();
        let enc = encode_candidate(&input, &cand).unwrap();
        let (logits, cache) = model.forward(&enc, false, &mut rng);
        let (_, dl) = softmax_cross_entropy(&logits, &[label.index()]);
        let dx = model.backward(&cache, &dl);
        let loss_at = |m: &AreModel, x: &Array2<f64>| {
            let input = SectionInput::new(x, spans());
            let enc = encode_candidate(&input, &cand).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(0);
            softmax_cross_entropy(&m.forward(&enc, false, &mut r).0, &[label.index()]).0
        };
        for i in 0..model.params().len() {
            let numeric = numeric_param_grad(&mut model, i, |m| loss_at(m, &x));
            let err = relative_error(&model.params()[i].grad, &numeric);
            assert!(err < 1e-4, "{} rel err {err}", model.params()[i].name);
        }
        let numeric = numeric_input_grad(&x, |x| loss_at(&model, x));
        assert!(relative_error(&dx, &numeric) < 1e-4);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = AreModel::new(&tiny(), 3, &mut rng);
        let bytes = model.to_checkpoint().to_bytes();
        let back = AreModel::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back.config, model.config);
        assert_eq!(back.to_checkpoint().to_bytes(), bytes);
    }
}
