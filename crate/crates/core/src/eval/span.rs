use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ClassCounts, Confusion, Counts};
use crate::corpus::{AduType, MergedAdu};

/// Which span's length the weak-match overlap is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Denominator {
    #[default]
    Shorter,
    Longer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum MatchMode {
    /// Identical fragment sets.
    #[default]
    Exact,
    /// Character overlap of at least half the denominator span.
    Weak { denominator: Denominator },
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchMode::Exact => f.write_str("exact"),
            MatchMode::Weak { denominator } => {
                let d = match denominator {
                    Denominator::Shorter => "shorter",
                    Denominator::Longer => "longer",
                };
                write!(f, "weak ({d})")
            }
        }
    }
}

/// Summed character overlap of all fragment pairs.
pub fn overlap(a: &MergedAdu, b: &MergedAdu) -> usize {
    a.fragments
        .iter()
        .flat_map(|x| b.fragments.iter().map(move |y| x.end.min(y.end).saturating_sub(x.start.max(y.start))))
        .sum()
}

fn identical(a: &MergedAdu, b: &MergedAdu) -> bool {
    let set = |m: &MergedAdu| m.fragments.iter().map(|f| (f.start, f.end)).collect::<BTreeSet<_>>();
    set(a) == set(b)
}

fn weak_match(gold: &MergedAdu, pred: &MergedAdu, denominator: Denominator) -> bool {
    let ov = overlap(gold, pred);
    let (lg, lp) = (gold.char_len(), pred.char_len());
    let denom = match denominator {
        Denominator::Shorter => lg.min(lp),
        Denominator::Longer => lg.max(lp),
    };
    ov > 0 && 2 * ov >= denom
}

fn order_key(m: &MergedAdu) -> (usize, usize, &str) {
    (m.start(), m.end(), m.id.as_str())
}

/// One-to-one greedy matching; returns `(gold index, pred index)` pairs.
///
/// Gold units are visited by start offset. Identical predictions are paired
/// first; in weak mode each remaining gold unit then takes the unmatched
/// qualifying prediction with the largest overlap, ties going to the earlier
/// start. With `typed`, only units of the same type can match.
pub fn match_spans(gold: &[MergedAdu], pred: &[MergedAdu], mode: MatchMode, typed: bool) -> Vec<(usize, usize)> {
    let mut gold_order: Vec<usize> = (0..gold.len()).collect();
    gold_order.sort_by(|&a, &b| order_key(&gold[a]).cmp(&order_key(&gold[b])));
    let mut pred_order: Vec<usize> = (0..pred.len()).collect();
    pred_order.sort_by(|&a, &b| order_key(&pred[a]).cmp(&order_key(&pred[b])));

    let compatible = |g: &MergedAdu, p: &MergedAdu| !typed || g.adu_type == p.adu_type;
    let mut gold_used = vec![false; gold.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut pairs = Vec::new();

    for &g in &gold_order {
        let hit = pred_order
            .iter()
            .copied()
            .find(|&p| !pred_used[p] && compatible(&gold[g], &pred[p]) && identical(&gold[g], &pred[p]));
        if let Some(p) = hit {
            gold_used[g] = true;
            pred_used[p] = true;
            pairs.push((g, p));
        }
    }

    if let MatchMode::Weak { denominator } = mode {
        for &g in &gold_order {
            if gold_used[g] {
                continue;
            }
            let mut best: Option<(usize, usize)> = None;
            for &p in &pred_order {
                if pred_used[p] || !compatible(&gold[g], &pred[p]) || !weak_match(&gold[g], &pred[p], denominator) {
                    continue;
                }
                let ov = overlap(&gold[g], &pred[p]);
                // pred_order is ascending, so strict > keeps the earliest start on ties
                if best.is_none_or(|(_, b)| ov > b) {
                    best = Some((p, ov));
                }
            }
            if let Some((p, _)) = best {
                gold_used[g] = true;
                pred_used[p] = true;
                pairs.push((g, p));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn empty_adu_counts() -> ClassCounts {
    AduType::ALL.iter().map(|t| (t.as_str().to_string(), Counts::default())).collect()
}

/// Typed span counts per ADU class.
pub fn span_counts(gold: &[MergedAdu], pred: &[MergedAdu], mode: MatchMode) -> ClassCounts {
    let pairs = match_spans(gold, pred, mode, true);
    let mut counts = empty_adu_counts();
    let mut gold_hit = vec![false; gold.len()];
    let mut pred_hit = vec![false; pred.len()];
    for &(g, p) in &pairs {
        gold_hit[g] = true;
        pred_hit[p] = true;
        counts.get_mut(gold[g].adu_type.as_str()).unwrap().tp += 1;
    }
    for (g, hit) in gold.iter().zip(&gold_hit) {
        if !hit {
            counts.get_mut(g.adu_type.as_str()).unwrap().fn_ += 1;
        }
    }
    for (p, hit) in pred.iter().zip(&pred_hit) {
        if !hit {
            counts.get_mut(p.adu_type.as_str()).unwrap().fp += 1;
        }
    }
    counts
}

pub const DETECTION_CLASS: &str = "adu";

/// Detection counts (types ignored) and classification counts over the
/// detection-matched pairs.
pub fn adu_decomposition(gold: &[MergedAdu], pred: &[MergedAdu], mode: MatchMode) -> (ClassCounts, ClassCounts) {
    let pairs = match_spans(gold, pred, mode, false);
    let tp = pairs.len();
    let mut detection = ClassCounts::new();
    detection.insert(
        DETECTION_CLASS.to_string(),
        Counts {
            tp,
            fp: pred.len() - tp,
            fn_: gold.len() - tp,
        },
    );
    let mut classification = empty_adu_counts();
    for &(g, p) in &pairs {
        let (gt, pt) = (gold[g].adu_type, pred[p].adu_type);
        if gt == pt {
            classification.get_mut(gt.as_str()).unwrap().tp += 1;
        } else {
            classification.get_mut(pt.as_str()).unwrap().fp += 1;
            classification.get_mut(gt.as_str()).unwrap().fn_ += 1;
        }
    }
    (detection, classification)
}

/// Confusion over detection-matched units; unmatched units land in `none`.
pub fn adu_confusion(gold: &[MergedAdu], pred: &[MergedAdu], mode: MatchMode) -> Confusion {
    let labels: Vec<&str> = AduType::ALL.iter().map(|t| t.as_str()).collect();
    let mut m = Confusion::new(&labels);
    let pairs = match_spans(gold, pred, mode, false);
    let mut gold_hit = vec![false; gold.len()];
    let mut pred_hit = vec![false; pred.len()];
    for &(g, p) in &pairs {
        gold_hit[g] = true;
        pred_hit[p] = true;
        m.record(Some(gold[g].adu_type.as_str()), Some(pred[p].adu_type.as_str()));
    }
    for (g, hit) in gold.iter().zip(gold_hit) {
        if !hit {
            m.record(Some(g.adu_type.as_str()), None);
        }
    }
    for (p, hit) in pred.iter().zip(pred_hit) {
        if !hit {
            m.record(None, Some(p.adu_type.as_str()));
        }
    }
    m
}
