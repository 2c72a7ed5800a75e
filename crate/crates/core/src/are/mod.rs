//! Argumentative relation extraction: candidate pairs inside a token window,
//! three embedding channels, a BiLSTM, a CNN with max pooling and a softmax
//! over five labels.

mod candidates;
mod model;

pub use candidates::{
    augment_relations, candidate_window, generate_candidates, inner_distance, label_map, plain_relations, related_pairs,
    sample_negatives, AreLabel, Candidate,
};
pub use model::{
    adu_tag_ids, arg_tag_ids, encode_candidate, AreCache, AreModel, Encoded, SectionInput, ADU_TAG_VOCAB, ARG_TAG_VOCAB,
    CHECKPOINT_KIND,
};

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::AreConfig;
use crate::corpus::{Relation, SectionKey};
use crate::data::{Example, PreparedSection};
use crate::eval::Counts;
use crate::graph::canonical;
use crate::nn::checkpoint::CheckpointError;
use crate::tagging::TokenSpan;
use crate::train::{cross_validate, fit, scale_grads, shuffled_batches, CvResult, Diverged, FitOptions, Trained};

#[derive(Debug, thiserror::Error)]
pub enum AreError {
    #[error("empty candidate window {start}..{end}")]
    EmptyWindow { start: usize, end: usize },
    #[error("feature width {got} does not match the model's {expected}")]
    FeatureWidth { expected: usize, got: usize },
    #[error("{section}: {rows} feature rows for {tokens} tokens")]
    FeatureRows { section: String, rows: usize, tokens: usize },
    #[error("{units} units but {ids} ids")]
    IdCount { units: usize, ids: usize },
    #[error("no training instances")]
    NoTrainingData,
    #[error("no dev sections")]
    NoDevData,
    #[error(transparent)]
    Diverged(#[from] Box<Diverged<AreModel>>),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// One labelled candidate of section `section`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance {
    pub section: usize,
    pub candidate: Candidate,
    pub label: AreLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub instances: Vec<Instance>,
    pub positives: usize,
    pub negatives: usize,
    /// Size of the pool negatives were drawn from.
    pub pool: usize,
    /// Labelled pairs lost to the distance or window filter.
    pub filtered_positives: usize,
}

fn gold_input<'a>(ex: &Example<'a>) -> Result<SectionInput<'a>, AreError> {
    if ex.features.nrows() != ex.section.len() {
        return Err(AreError::FeatureRows {
            section: ex.section.key.to_string(),
            rows: ex.features.nrows(),
            tokens: ex.section.len(),
        });
    }
    Ok(SectionInput::new(ex.features, ex.section.token_spans()))
}

fn gold_ids(section: &PreparedSection) -> Vec<&str> {
    section.token_adus.iter().map(|a| a.id.as_str()).collect()
}

/// Positives from gold relations (augmented when configured) plus negatives
/// sampled from all candidate pairs not related in either direction.
pub fn build_training_set(sections: &[&PreparedSection], config: &AreConfig, rng: &mut ChaCha8Rng) -> TrainingSet {
    let mut positives = Vec::new();
    let mut pool = Vec::new();
    let mut filtered = 0;
    let mut unaugmented = 0;
    for (si, section) in sections.iter().enumerate() {
        let ids = gold_ids(section);
        let cands = generate_candidates(&section.token_spans(), section.len(), config.max_dist_d, config.window_k);
        let plain = plain_relations(&section.relations);
        let labelled = if config.augment { augment_relations(&section.relations) } else { plain.clone() };
        let labels = label_map(&labelled);
        let plain_labels = label_map(&plain);
        let related = related_pairs(&section.relations);
        let mut found = 0;
        for c in cands {
            let (h, t) = (ids[c.head], ids[c.tail]);
            let key = (h.to_string(), t.to_string());
            if let Some(&label) = labels.get(&key) {
                positives.push(Instance { section: si, candidate: c, label });
                found += 1;
                unaugmented += usize::from(plain_labels.contains_key(&key));
            } else {
                let pair = if h <= t { (h.to_string(), t.to_string()) } else { (t.to_string(), h.to_string()) };
                if !related.contains(&pair) {
                    pool.push(Instance {
                        section: si,
                        candidate: c,
                        label: AreLabel::NoRelation,
                    });
                }
            }
        }
        filtered += labels.len() - found;
    }
    if filtered > 0 {
        log::info!("{filtered} labelled pairs fall outside the candidate filter");
    }
    let quota_base = if config.neg_after_augmentation { positives.len() } else { unaugmented };
    let negatives = sample_negatives(&pool, quota_base, config.neg_factor, rng);
    let n_pos = positives.len();
    let n_neg = negatives.len();
    let mut instances = positives;
    instances.extend(negatives);
    TrainingSet {
        instances,
        positives: n_pos,
        negatives: n_neg,
        pool: pool.len(),
        filtered_positives: filtered,
    }
}

/// Relations predicted for one section's units. `supports_rev` is rewritten
/// to `supports` with swapped endpoints; symmetric labels are canonicalised.
pub fn predict_relations(model: &AreModel, input: &SectionInput<'_>, ids: &[String]) -> Result<Vec<Relation>, AreError> {
    model.check_features(input.features)?;
    if ids.len() != input.spans.len() {
        return Err(AreError::IdCount {
            units: input.spans.len(),
            ids: ids.len(),
        });
    }
    let cfg = &model.config;
    let mut out = BTreeSet::new();
    for c in generate_candidates(&input.spans, input.features.nrows(), cfg.max_dist_d, cfg.window_k) {
        let enc = encode_candidate(input, &c)?;
        if let Some(r) = model.classify(&enc).to_relation(&ids[c.head], &ids[c.tail]) {
            out.insert(canonical(&r));
        }
    }
    Ok(out.into_iter().collect())
}

/// Relation counts on gold units, all three learned corpus labels pooled.
pub fn gold_unit_counts(model: &AreModel, examples: &[Example<'_>]) -> Result<Counts, AreError> {
    let mut counts = Counts::default();
    for ex in examples {
        let input = gold_input(ex)?;
        let ids: Vec<String> = gold_ids(ex.section).into_iter().map(String::from).collect();
        let pred: BTreeSet<Relation> = predict_relations(model, &input, &ids)?.into_iter().collect();
        let gold: BTreeSet<Relation> = ex
            .section
            .relations
            .iter()
            .filter(|r| AreLabel::from_relation(r.label).is_some())
            .map(canonical)
            .collect();
        let tp = pred.intersection(&gold).count();
        counts.add(Counts {
            tp,
            fp: pred.len() - tp,
            fn_: gold.len() - tp,
        });
    }
    Ok(counts)
}

/// Micro-F1 over supports, contradicts and parts_of_same on gold units.
pub fn relation_micro_f1(model: &AreModel, examples: &[Example<'_>]) -> Result<f64, AreError> {
    Ok(gold_unit_counts(model, examples)?.prf().f1)
}

/// Trains one model, early-stopping on dev micro-F1 with gold units.
pub fn train_are(train: &[Example<'_>], dev: &[Example<'_>], config: &AreConfig) -> Result<Trained<AreModel>, AreError> {
    if dev.is_empty() {
        return Err(AreError::NoDevData);
    }
    let inputs: Vec<SectionInput<'_>> = train.iter().map(gold_input).collect::<Result<_, _>>()?;
    for ex in dev {
        gold_input(ex)?;
    }
    let sections: Vec<&PreparedSection> = train.iter().map(|e| e.section).collect();
    let mut sample_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x0e9a_71e5);
    let set = build_training_set(&sections, config, &mut sample_rng);
    log::info!(
        "relation training set: {} positives, {} negatives (pool {})",
        set.positives,
        set.negatives,
        set.pool
    );
    if set.instances.is_empty() {
        return Err(AreError::NoTrainingData);
    }
    let embed_dim = inputs[set.instances[0].section].features.ncols();
    for input in &inputs {
        if input.features.ncols() != embed_dim {
            return Err(AreError::FeatureWidth {
                expected: embed_dim,
                got: input.features.ncols(),
            });
        }
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_a7e0);
    let model = AreModel::new(config, embed_dim, &mut init_rng);
    let opts = FitOptions {
        lr: config.lr,
        grad_clip: config.grad_clip,
        patience: config.patience,
        max_epochs: config.max_epochs,
        seed: config.seed,
    };
    let instances = &set.instances;
    let mut dev_error = None;
    let result = fit(
        model,
        &opts,
        |rng| shuffled_batches(instances.len(), config.batch_size, rng),
        |m, batch, rng| {
            let mut loss = 0.0;
            for &i in batch {
                let inst = &instances[i];
                let enc = encode_candidate(&inputs[inst.section], &inst.candidate).map_err(|e| e.to_string())?;
                loss += m.loss_backward(&enc, inst.label, rng);
            }
            let norm = 1.0 / batch.len().max(1) as f64;
            scale_grads(m, norm);
            Ok(loss * norm)
        },
        |m| match relation_micro_f1(m, dev) {
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
    result.map_err(|d| AreError::Diverged(Box::new(d)))
}

/// k-fold cross-validation over whole documents, seeds `config.seed + fold`.
pub fn cross_validate_are(examples: &[Example<'_>], config: &AreConfig) -> Result<CvResult<AreModel>, AreError> {
    cross_validate(examples, config.folds, |train, dev, fold| {
        let mut cfg = config.clone();
        cfg.seed = config.seed + fold as u64;
        train_are(train, dev, &cfg)
    })
}

/// One candidate pair as written by the inspection dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub section: SectionKey,
    pub head: String,
    pub tail: String,
    pub head_tokens: TokenSpan,
    pub tail_tokens: TokenSpan,
    pub gap: usize,
    pub window: (usize, usize),
    pub label: AreLabel,
}

/// Every candidate of a section with its gold training label.
pub fn candidate_records(section: &PreparedSection, config: &AreConfig) -> Vec<CandidateRecord> {
    let ids = gold_ids(section);
    let spans = section.token_spans();
    let labelled = if config.augment { augment_relations(&section.relations) } else { plain_relations(&section.relations) };
    let labels = label_map(&labelled);
    generate_candidates(&spans, section.len(), config.max_dist_d, config.window_k)
        .into_iter()
        .map(|c| CandidateRecord {
            section: section.key.clone(),
            head: ids[c.head].to_string(),
            tail: ids[c.tail].to_string(),
            head_tokens: spans[c.head],
            tail_tokens: spans[c.tail],
            gap: c.gap,
            window: c.window,
            label: labels
                .get(&(ids[c.head].to_string(), ids[c.tail].to_string()))
                .copied()
                .unwrap_or(AreLabel::NoRelation),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AduSpan, AduType, RelationLabel, Section};
    use crate::data::{embed_section, examples};
    use crate::embed::HashEmbedder;
    use ndarray::Array2;
    use proptest::prelude::*;
    use std::collections::HashSet;

    /// Units are single words separated by one filler word.
    fn section(doc: &str, n_units: usize, rels: &[(usize, usize, RelationLabel)], words: &[&str]) -> PreparedSection {
        let mut text = String::new();
        let mut adus = Vec::new();
        for i in 0..n_units {
            if i > 0 {
                text.push_str(" x ");
            }
            let start = text.chars().count();
            text.push_str(words[i % words.len()]);
            adus.push(AduSpan::new(format!("T{i}"), AduType::OwnClaim, start, text.chars().count()));
        }
        let relations = rels
            .iter()
            .map(|&(h, t, l)| Relation::new(format!("T{h}"), format!("T{t}"), l))
            .collect();
        PreparedSection::new(&Section {
            doc_id: doc.into(),
            index: 0,
            char_start: 0,
            char_end: text.chars().count(),
            text,
            adus,
            relations,
        })
    }

    fn config() -> AreConfig {
        AreConfig {
            lstm_hidden: 6,
            lstm_layers: 1,
            cnn_filters: 6,
            ngram_sizes: vec![2, 3],
            proj_hidden: 8,
            adu_tag_dim: 3,
            arg_tag_dim: 3,
            dropout_io: 0.0,
            dropout_lstm: 0.0,
            window_k: 12,
            max_dist_d: 6,
            batch_size: 8,
            lr: 0.01,
            max_epochs: 80,
            patience: 80,
            ..AreConfig::default()
        }
    }

    #[test]
    fn training_set_counts() {
        use RelationLabel::*;
        let s = section("D", 12, &[(0, 1, Supports), (2, 3, Contradicts)], &["a"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = config();
        let set = build_training_set(&[&s], &cfg, &mut rng);
        assert_eq!(set.positives, 4);
        assert_eq!(set.negatives, 12);
        let labels: HashSet<AreLabel> = set.instances[..4].iter().map(|i| i.label).collect();
        assert!(labels.contains(&AreLabel::SupportsRev));
        let no_aug = AreConfig { augment: false, ..cfg.clone() };
        let set = build_training_set(&[&s], &no_aug, &mut rng);
        assert_eq!((set.positives, set.negatives), (2, 6));
        let pre = AreConfig {
            neg_after_augmentation: false,
            ..cfg
        };
        let set = build_training_set(&[&s], &pre, &mut rng);
        assert_eq!((set.positives, set.negatives), (4, 6));
    }

    #[test]
    fn symmetric_labels_in_both_orders() {
        use RelationLabel::*;
        let s = section("D", 4, &[(0, 1, PartsOfSame), (3, 2, Contradicts)], &["a"]);
        let set = build_training_set(&[&s], &config(), &mut ChaCha8Rng::seed_from_u64(0));
        let ordered: HashSet<(usize, usize, AreLabel)> = set.instances.iter().map(|i| (i.candidate.head, i.candidate.tail, i.label)).collect();
        for (a, b, l) in [(0, 1, AreLabel::PartsOfSame), (2, 3, AreLabel::Contradicts)] {
            assert!(ordered.contains(&(a, b, l)) && ordered.contains(&(b, a, l)));
        }
    }

    #[test]
    fn rewrite_supports_rev() {
        let r = AreLabel::SupportsRev.to_relation("T2", "T1").unwrap();
        assert_eq!(r, Relation::new("T1", "T2", RelationLabel::Supports));
    }

    #[test]
    fn dump_labels_candidates() {
        let s = section("D", 3, &[(0, 1, RelationLabel::Supports)], &["a"]);
        let recs = candidate_records(&s, &config());
        assert_eq!(recs.len(), 6);
        assert_eq!(recs.iter().filter(|r| r.label == AreLabel::SupportsRev).count(), 1);
        let line = serde_json::to_string(&recs[0]).unwrap();
        assert_eq!(serde_json::from_str::<CandidateRecord>(&line).unwrap(), recs[0]);
    }

    #[test]
    fn overfits_keyword_relations() {
        use RelationLabel::*;
        // "because" units support their left neighbour, "however" units contradict it
        let sections: Vec<PreparedSection> = (0..6)
            .map(|i| {
                let words = if i % 2 == 0 { ["claim", "because", "claim", "however"] } else { ["claim", "however", "claim", "because"] };
                let rels: Vec<(usize, usize, RelationLabel)> = (1..4)
                    .step_by(2)
                    .map(|u| if words[u] == "because" { (u, u - 1, Supports) } else { (u, u - 1, Contradicts) })
                    .collect();
                section(&format!("D{i}"), 4, &rels, &words)
            })
            .collect();
        let embedder = HashEmbedder::new(8, 3);
        let feats: Vec<Array2<f64>> = sections.iter().map(|s| embed_section(&embedder, s).unwrap()).collect();
        let ex = examples(&sections, &feats);
        let cfg = config();
        let a = train_are(&ex, &ex, &cfg).unwrap();
        assert!(a.log.best_dev_score >= 0.95, "dev micro-F1 {}", a.log.best_dev_score);
        let b = train_are(&ex, &ex, &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(relation_micro_f1(&a.model, &ex).unwrap(), a.log.best_dev_score);
    }

    proptest! {
        #[test]
        fn positives_and_negatives_disjoint(
            n in 2usize..9,
            rels in prop::collection::vec((0usize..9, 0usize..9, 0usize..3), 0..6),
            seed in 0u64..50,
        ) {
            let labels = [RelationLabel::Supports, RelationLabel::Contradicts, RelationLabel::PartsOfSame];
            let rels: Vec<(usize, usize, RelationLabel)> = rels
                .into_iter()
                .filter(|&(h, t, _)| h < n && t < n && h != t)
                .map(|(h, t, l)| (h, t, labels[l]))
                .collect();
            let mut seen = HashSet::new();
            let rels: Vec<_> = rels.into_iter().filter(|&(h, t, _)| seen.insert((h.min(t), h.max(t)))).collect();
            let s = section("D", n, &rels, &["a", "b"]);
            let cfg = AreConfig { max_dist_d: 100, window_k: 200, ..config() };
            let set = build_training_set(&[&s], &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(set.positives, 2 * rels.len());
            let pos: HashSet<(usize, usize)> = set.instances.iter().filter(|i| i.label != AreLabel::NoRelation).map(|i| (i.candidate.head, i.candidate.tail)).collect();
            let neg: Vec<(usize, usize)> = set.instances.iter().filter(|i| i.label == AreLabel::NoRelation).map(|i| (i.candidate.head, i.candidate.tail)).collect();
            for p in &neg {
                prop_assert!(!pos.contains(p) && !pos.contains(&(p.1, p.0)));
            }
            prop_assert_eq!(neg.len(), (3 * set.positives).min(set.pool));
        }
    }
}
