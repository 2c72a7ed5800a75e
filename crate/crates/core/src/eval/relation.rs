use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{match_spans, ClassCounts, Confusion, Counts, MatchMode};
use crate::corpus::{MergedAdu, Relation, RelationLabel};
use crate::graph::ArgumentGraph;

pub const RELATION_LABELS: [&str; 2] = ["supports", "contradicts"];

/// Maps predicted unit ids to the gold unit ids they match (typed).
pub fn align_adus(gold: &[MergedAdu], pred: &[MergedAdu], mode: MatchMode) -> HashMap<String, String> {
    match_spans(gold, pred, mode, true)
        .into_iter()
        .map(|(g, p)| (pred[p].id.clone(), gold[g].id.clone()))
        .collect()
}

type Key = (String, String, RelationLabel);

fn key(head: &str, tail: &str, label: RelationLabel) -> Key {
    if label.is_symmetric() && tail < head {
        (tail.to_string(), head.to_string(), label)
    } else {
        (head.to_string(), tail.to_string(), label)
    }
}

fn pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn sorted(rels: &[Relation]) -> Vec<&Relation> {
    let mut v: Vec<&Relation> = rels.iter().collect();
    v.sort();
    v
}

fn match_relations(
    gold: &[Relation],
    pred: &[Relation],
    align: &HashMap<String, String>,
    labels: &[&str],
) -> ClassCounts {
    let mut counts: ClassCounts = labels.iter().map(|l| (l.to_string(), Counts::default())).collect();
    let mut open: BTreeSet<Key> = gold.iter().map(|r| key(&r.head, &r.tail, r.label)).collect();
    for r in sorted(pred) {
        let c = counts.entry(r.label.as_str().to_string()).or_default();
        let mapped = align.get(&r.head).zip(align.get(&r.tail));
        match mapped {
            Some((h, t)) if open.remove(&key(h, t, r.label)) => c.tp += 1,
            _ => c.fp += 1,
        }
    }
    for (_, _, label) in open {
        counts.entry(label.as_str().to_string()).or_default().fn_ += 1;
    }
    counts
}

/// Relation counts per label. A prediction is a true positive when both
/// endpoints match gold units joined by a gold relation with the same label
/// (and direction, unless the label is symmetric).
pub fn relation_counts(gold: &ArgumentGraph, pred: &ArgumentGraph, mode: MatchMode) -> ClassCounts {
    let align = align_adus(&gold.adus, &pred.adus, mode);
    match_relations(&gold.relations, &pred.relations, &align, &RELATION_LABELS)
}

/// `parts_of_same` links scored over fragments.
pub fn parts_of_same_counts(gold: &ArgumentGraph, pred: &ArgumentGraph, mode: MatchMode) -> ClassCounts {
    let singles = |g: &ArgumentGraph| -> Vec<MergedAdu> { g.fragments().cloned().map(MergedAdu::single).collect() };
    let align = align_adus(&singles(gold), &singles(pred), mode);
    match_relations(&gold.parts_of_same, &pred.parts_of_same, &align, &["parts_of_same"])
}

struct PairMatch<'a> {
    matched: Vec<(&'a Relation, &'a Relation)>,
    unmatched_gold: Vec<&'a Relation>,
    unmatched_pred: Vec<&'a Relation>,
}

/// Matches relations by unordered endpoint pair, ignoring labels.
fn match_pairs<'a>(gold: &'a ArgumentGraph, pred: &'a ArgumentGraph, mode: MatchMode) -> PairMatch<'a> {
    let align = align_adus(&gold.adus, &pred.adus, mode);
    let mut by_pair: BTreeMap<(String, String), Vec<&Relation>> = BTreeMap::new();
    for r in sorted(&gold.relations) {
        by_pair.entry(pair(&r.head, &r.tail)).or_default().push(r);
    }
    let mut used: BTreeSet<(String, String)> = BTreeSet::new();
    let mut out = PairMatch {
        matched: Vec::new(),
        unmatched_gold: Vec::new(),
        unmatched_pred: Vec::new(),
    };
    for r in sorted(&pred.relations) {
        let mapped = align.get(&r.head).zip(align.get(&r.tail)).map(|(h, t)| (h.clone(), t.clone()));
        let hit = mapped.and_then(|(h, t)| {
            let p = pair(&h, &t);
            let golds = by_pair.get(&p)?;
            if used.contains(&p) {
                return None;
            }
            let same = golds
                .iter()
                .find(|g| g.label == r.label && (r.label.is_symmetric() || (g.head == h && g.tail == t)));
            Some((p, *same.unwrap_or(&golds[0])))
        });
        match hit {
            Some((p, g)) => {
                used.insert(p);
                out.matched.push((g, r));
            }
            None => out.unmatched_pred.push(r),
        }
    }
    for (p, golds) in &by_pair {
        if !used.contains(p) {
            out.unmatched_gold.push(golds[0]);
        }
    }
    out
}

pub const RELATION_DETECTION_CLASS: &str = "relation";

/// Detection counts over unordered endpoint pairs (labels ignored) and
/// label counts over the detected pairs.
pub fn relation_decomposition(gold: &ArgumentGraph, pred: &ArgumentGraph, mode: MatchMode) -> (ClassCounts, ClassCounts) {
    let m = match_pairs(gold, pred, mode);
    let mut detection = ClassCounts::new();
    detection.insert(
        RELATION_DETECTION_CLASS.to_string(),
        Counts {
            tp: m.matched.len(),
            fp: m.unmatched_pred.len(),
            fn_: m.unmatched_gold.len(),
        },
    );
    let align = align_adus(&gold.adus, &pred.adus, mode);
    let mut classification: ClassCounts = RELATION_LABELS.iter().map(|l| (l.to_string(), Counts::default())).collect();
    for (g, p) in &m.matched {
        let same_direction = align.get(&p.head) == Some(&g.head);
        if g.label == p.label && (g.label.is_symmetric() || same_direction) {
            classification.entry(g.label.as_str().into()).or_default().tp += 1;
        } else {
            classification.entry(p.label.as_str().into()).or_default().fp += 1;
            classification.entry(g.label.as_str().into()).or_default().fn_ += 1;
        }
    }
    (detection, classification)
}

pub fn relation_confusion(gold: &ArgumentGraph, pred: &ArgumentGraph, mode: MatchMode) -> Confusion {
    let mut c = Confusion::new(&RELATION_LABELS);
    let m = match_pairs(gold, pred, mode);
    for (g, p) in m.matched {
        c.record(Some(g.label.as_str()), Some(p.label.as_str()));
    }
    for g in m.unmatched_gold {
        c.record(Some(g.label.as_str()), None);
    }
    for p in m.unmatched_pred {
        c.record(None, Some(p.label.as_str()));
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AduSpan, AduType, SectionKey};
    use crate::eval::{Denominator, ScoreReport};

    fn graph(adus: &[(&str, usize, usize)], rels: &[(&str, &str, RelationLabel)]) -> ArgumentGraph {
        let frags: Vec<AduSpan> = adus
            .iter()
            .map(|&(id, s, e)| AduSpan::new(id, AduType::OwnClaim, s, e))
            .collect();
        let rels: Vec<Relation> = rels.iter().map(|&(h, t, l)| Relation::new(h, t, l)).collect();
        ArgumentGraph::from_fragments(
            SectionKey {
                doc_id: "D".into(),
                index: 0,
            },
            &frags,
            &rels,
        )
    }

    use RelationLabel::{Contradicts as C, Supports as S};

    #[test]
    fn one_correct_one_wrong_label() {
        let adus = [("a", 0, 5), ("b", 10, 15), ("c", 20, 25)];
        let gold = graph(&adus, &[("a", "b", S), ("c", "b", S)]);
        let pred = graph(&adus, &[("a", "b", S), ("c", "b", C)]);
        let r = ScoreReport::from_counts(&relation_counts(&gold, &pred, MatchMode::Exact));
        assert_eq!((r.micro.precision, r.micro.recall), (0.5, 0.5));
    }

    #[test]
    fn unmatched_endpoint_is_false_positive() {
        let gold = graph(&[("a", 0, 5), ("b", 10, 15)], &[("a", "b", S)]);
        let pred = graph(&[("a", 0, 5), ("x", 30, 35)], &[("a", "x", S)]);
        let c = relation_counts(&gold, &pred, MatchMode::Exact);
        assert_eq!(c["supports"], Counts { tp: 0, fp: 1, fn_: 1 });
    }

    #[test]
    fn direction_and_symmetry() {
        let adus = [("a", 0, 5), ("b", 10, 15)];
        let gold = graph(&adus, &[("a", "b", S)]);
        let rev = graph(&adus, &[("b", "a", S)]);
        assert_eq!(relation_counts(&gold, &rev, MatchMode::Exact)["supports"].tp, 0);
        let gold = graph(&adus, &[("a", "b", C)]);
        let rev = graph(&adus, &[("b", "a", C)]);
        assert_eq!(relation_counts(&gold, &rev, MatchMode::Exact)["contradicts"].tp, 1);
    }

    #[test]
    fn exact_equals_weak_on_gold_adus() {
        let adus = [("a", 0, 5), ("b", 10, 15), ("c", 20, 25)];
        let gold = graph(&adus, &[("a", "b", S), ("c", "a", C)]);
        let pred = graph(&adus, &[("a", "b", S), ("b", "c", S)]);
        let weak = MatchMode::Weak {
            denominator: Denominator::Longer,
        };
        assert_eq!(relation_counts(&gold, &pred, MatchMode::Exact), relation_counts(&gold, &pred, weak));
    }

    #[test]
    fn decomposition() {
        let adus = [("a", 0, 5), ("b", 10, 15), ("c", 20, 25)];
        let gold = graph(&adus, &[("a", "b", S), ("c", "b", S)]);
        let pred = graph(&adus, &[("a", "b", C), ("c", "b", S)]);
        let (d, c) = relation_decomposition(&gold, &pred, MatchMode::Exact);
        assert_eq!(ScoreReport::from_counts(&d).micro.f1, 1.0);
        assert_eq!(ScoreReport::from_counts(&c).micro.f1, 0.5);
        let conf = relation_confusion(&gold, &pred, MatchMode::Exact);
        assert_eq!(conf.get(Some("supports"), Some("contradicts")), 1);
        assert_eq!(conf.get(Some("supports"), Some("supports")), 1);
    }

    #[test]
    fn parts_of_same_scored_on_fragments() {
        let adus = [("a", 0, 5), ("b", 10, 15), ("c", 20, 25)];
        let gold = graph(&adus, &[("a", "b", RelationLabel::PartsOfSame)]);
        let pred = graph(&adus, &[("b", "a", RelationLabel::PartsOfSame), ("b", "c", RelationLabel::PartsOfSame)]);
        let c = parts_of_same_counts(&gold, &pred, MatchMode::Exact);
        assert_eq!(c["parts_of_same"], Counts { tp: 1, fp: 1, fn_: 0 });
    }
}
