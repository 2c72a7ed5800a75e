use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Relation, RelationLabel};
use crate::tagging::TokenSpan;

/// Classifier targets: the corpus labels plus `supports_rev` and `no_relation`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreLabel {
    Supports,
    SupportsRev,
    Contradicts,
    PartsOfSame,
    NoRelation,
}

impl AreLabel {
    pub const ALL: [AreLabel; 5] = [
        AreLabel::Supports,
        AreLabel::SupportsRev,
        AreLabel::Contradicts,
        AreLabel::PartsOfSame,
        AreLabel::NoRelation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AreLabel::Supports => "supports",
            AreLabel::SupportsRev => "supports_rev",
            AreLabel::Contradicts => "contradicts",
            AreLabel::PartsOfSame => "parts_of_same",
            AreLabel::NoRelation => "no_relation",
        }
    }

    /// `None` for labels the classifier does not learn.
    pub fn from_relation(label: RelationLabel) -> Option<Self> {
        match label {
            RelationLabel::Supports => Some(AreLabel::Supports),
            RelationLabel::Contradicts => Some(AreLabel::Contradicts),
            RelationLabel::PartsOfSame => Some(AreLabel::PartsOfSame),
            RelationLabel::SemanticallySame => None,
        }
    }

    /// The corpus relation a prediction on `(head, tail)` stands for.
    pub fn to_relation(self, head: &str, tail: &str) -> Option<Relation> {
        match self {
            AreLabel::Supports => Some(Relation::new(head, tail, RelationLabel::Supports)),
            AreLabel::SupportsRev => Some(Relation::new(tail, head, RelationLabel::Supports)),
            AreLabel::Contradicts => Some(Relation::new(head, tail, RelationLabel::Contradicts)),
            AreLabel::PartsOfSame => Some(Relation::new(head, tail, RelationLabel::PartsOfSame)),
            AreLabel::NoRelation => None,
        }
    }
}

impl fmt::Display for AreLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tokens strictly between two spans; 0 when they touch or overlap.
pub fn inner_distance(a: &TokenSpan, b: &TokenSpan) -> usize {
    a.start.max(b.start).saturating_sub(a.end.min(b.end))
}

/// A window of at most `k` tokens centred on the pair, shifted to stay inside
/// `[0, n_tokens)`. `None` when the pair itself does not fit.
pub fn candidate_window(a: &TokenSpan, b: &TokenSpan, n_tokens: usize, k: usize) -> Option<(usize, usize)> {
    let lo = a.start.min(b.start);
    let hi = a.end.max(b.end);
    if hi - lo > k {
        return None;
    }
    let centre = (lo + hi) / 2;
    let start = centre.saturating_sub(k / 2).min(n_tokens.saturating_sub(k));
    let end = (start + k).min(n_tokens);
    Some((start, end))
}

/// An ordered pair of units (indices into the section's unit list).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub head: usize,
    pub tail: usize,
    pub gap: usize,
    pub window: (usize, usize),
}

/// All ordered pairs with inner distance below `d` whose window fits in `k` tokens.
pub fn generate_candidates(spans: &[TokenSpan], n_tokens: usize, d: usize, k: usize) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (h, hs) in spans.iter().enumerate() {
        for (t, ts) in spans.iter().enumerate() {
            if h == t {
                continue;
            }
            let gap = inner_distance(hs, ts);
            if gap >= d {
                continue;
            }
            match candidate_window(hs, ts, n_tokens, k) {
                Some(window) => out.push(Candidate { head: h, tail: t, gap, window }),
                None => {
                    if h < t {
                        log::warn!("pair spanning {}..{} exceeds the {k}-token window, skipped", hs.start.min(ts.start), hs.end.max(ts.end));
                    }
                }
            }
        }
    }
    out
}

/// Labelled pairs for training: every `supports(A, B)` also yields
/// `supports_rev(B, A)`, symmetric labels appear in both orders.
pub fn augment_relations(relations: &[Relation]) -> Vec<(String, String, AreLabel)> {
    let mut out = Vec::with_capacity(relations.len() * 2);
    for r in relations {
        let Some(label) = AreLabel::from_relation(r.label) else {
            log::debug!("{} relation {} -> {} not used for training", r.label, r.head, r.tail);
            continue;
        };
        let reverse = if label == AreLabel::Supports { AreLabel::SupportsRev } else { label };
        out.push((r.head.clone(), r.tail.clone(), label));
        out.push((r.tail.clone(), r.head.clone(), reverse));
    }
    out
}

/// Labelled pairs without augmentation.
pub fn plain_relations(relations: &[Relation]) -> Vec<(String, String, AreLabel)> {
    relations
        .iter()
        .filter_map(|r| AreLabel::from_relation(r.label).map(|l| (r.head.clone(), r.tail.clone(), l)))
        .collect()
}

/// Uniform sample without replacement of `min(factor * positives, pool.len())`
/// pool items, kept in pool order.
pub fn sample_negatives<T: Clone, R: Rng>(pool: &[T], positives: usize, factor: usize, rng: &mut R) -> Vec<T> {
    let quota = (factor * positives).min(pool.len());
    let mut idx = sample(rng, pool.len(), quota).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i].clone()).collect()
}

/// Unordered pairs of unit ids joined by any relation.
pub fn related_pairs(relations: &[Relation]) -> HashSet<(String, String)> {
    relations
        .iter()
        .map(|r| {
            if r.head <= r.tail {
                (r.head.clone(), r.tail.clone())
            } else {
                (r.tail.clone(), r.head.clone())
            }
        })
        .collect()
}

/// Gold labels of the candidate pairs, keyed by ordered id pair.
pub fn label_map(pairs: &[(String, String, AreLabel)]) -> BTreeMap<(String, String), AreLabel> {
    let mut map = BTreeMap::new();
    for (h, t, l) in pairs {
        if let Some(prev) = map.insert((h.clone(), t.clone()), *l) {
            if prev != *l {
                log::warn!("pair {h} -> {t} labelled both {prev} and {l}; keeping {l}");
            }
        }
    }
    map
}
