use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{align_adus, MatchMode};
use crate::corpus::{char_slice, MergedAdu, Relation};
use crate::graph::{canonical, ArgumentGraph};
use crate::tagging::tokenize;

/// Contrastive connector phrases, most frequent first.
pub const CONNECTORS: [&str; 7] = ["however", "but", "while", "in contrast", "though", "despite", "even though"];
pub const BRACKETS: &str = "BRACKETS";
pub const NO_CONNECTOR: &str = "NONE";

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Number of sentence-final punctuation marks before character `pos`.
pub fn sentence_index(text: &str, pos: usize) -> usize {
    text.chars().take(pos).filter(|&c| is_terminal(c)).count()
}

fn sentence_start(text: &str, pos: usize) -> usize {
    let chars: Vec<char> = text.chars().take(pos).collect();
    chars.iter().rposition(|&c| is_terminal(c)).map_or(0, |i| i + 1)
}

fn find_connector(region: &str) -> Option<&'static str> {
    let words: Vec<String> = tokenize(region).into_iter().map(|t| t.text.to_lowercase()).collect();
    let mut phrases: Vec<(Vec<&str>, &'static str)> = CONNECTORS
        .iter()
        .map(|&c| (c.split(' ').collect::<Vec<_>>(), c))
        .collect();
    phrases.sort_by_key(|(p, _)| std::cmp::Reverse(p.len()));
    (0..words.len()).find_map(|i| {
        phrases
            .iter()
            .find(|(p, _)| words.len() >= i + p.len() && p.iter().zip(&words[i..]).all(|(a, b)| a == b))
            .map(|(_, c)| *c)
    })
}

/// Connector for a pair of units: the first lexicon phrase between them, else
/// the first one from the start of the earlier unit's sentence up to that
/// unit. Without a phrase, `BRACKETS` if a bracket sits between the units,
/// else `NONE`. Longer phrases win at the same position.
pub fn connector(text: &str, a: &MergedAdu, b: &MergedAdu) -> String {
    let (first, second) = if (a.start(), a.end()) <= (b.start(), b.end()) { (a, b) } else { (b, a) };
    let between = if first.end() < second.start() {
        char_slice(text, first.end(), second.start())
    } else {
        String::new()
    };
    let before = char_slice(text, sentence_start(text, first.start()), first.start());
    if let Some(c) = find_connector(&between).or_else(|| find_connector(&before)) {
        return c.to_string();
    }
    if between.chars().any(|c| matches!(c, '(' | ')' | '[' | ']')) {
        BRACKETS.to_string()
    } else {
        NO_CONNECTOR.to_string()
    }
}

fn same_sentence(text: &str, a: &MergedAdu, b: &MergedAdu) -> bool {
    let s = sentence_index(text, a.start().min(b.start()));
    let last = a.end().max(b.end()).saturating_sub(1);
    sentence_index(text, last) == s
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCounts {
    pub total: usize,
    pub connectors: BTreeMap<String, usize>,
    /// Unordered argument type pair, e.g. `data-own_claim`.
    pub arg_types: BTreeMap<String, usize>,
    pub same_sentence: BTreeMap<String, usize>,
}

impl FeatureCounts {
    fn record(&mut self, text: &str, head: &MergedAdu, tail: &MergedAdu) {
        self.total += 1;
        *self.connectors.entry(connector(text, head, tail)).or_default() += 1;
        let mut types = [head.adu_type.as_str(), tail.adu_type.as_str()];
        types.sort_unstable();
        *self.arg_types.entry(types.join("-")).or_default() += 1;
        *self.same_sentence.entry(same_sentence(text, head, tail).to_string()).or_default() += 1;
    }

    pub fn add(&mut self, other: &FeatureCounts) {
        self.total += other.total;
        for (mine, theirs) in [
            (&mut self.connectors, &other.connectors),
            (&mut self.arg_types, &other.arg_types),
            (&mut self.same_sentence, &other.same_sentence),
        ] {
            for (k, v) in theirs {
                *mine.entry(k.clone()).or_default() += v;
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorFeatureReport {
    pub tp: FeatureCounts,
    pub fp: FeatureCounts,
    #[serde(rename = "fn")]
    pub fn_: FeatureCounts,
}

impl ErrorFeatureReport {
    pub fn add(&mut self, other: &ErrorFeatureReport) {
        self.tp.add(&other.tp);
        self.fp.add(&other.fp);
        self.fn_.add(&other.fn_);
    }
}

/// Feature distributions of true positive, false positive and false
/// negative relations in one section. `text` is the section text.
pub fn error_feature_report(pred: &ArgumentGraph, gold: &ArgumentGraph, text: &str, mode: MatchMode) -> ErrorFeatureReport {
    let align = align_adus(&gold.adus, &pred.adus, mode);
    let mut open: BTreeSet<Relation> = gold.relations.iter().map(canonical).collect();
    let mut report = ErrorFeatureReport::default();
    let mut preds: Vec<&Relation> = pred.relations.iter().collect();
    preds.sort();
    for r in preds {
        let (Some(h), Some(t)) = (pred.adu(&r.head), pred.adu(&r.tail)) else {
            continue;
        };
        let hit = match (align.get(&r.head), align.get(&r.tail)) {
            (Some(gh), Some(gt)) => open.remove(&canonical(&Relation::new(gh.clone(), gt.clone(), r.label))),
            _ => false,
        };
        if hit {
            report.tp.record(text, h, t);
        } else {
            report.fp.record(text, h, t);
        }
    }
    for r in &open {
        if let (Some(h), Some(t)) = (gold.adu(&r.head), gold.adu(&r.tail)) {
            report.fn_.record(text, h, t);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AduSpan, AduType, RelationLabel, SectionKey};

    fn unit(id: &str, t: AduType, s: usize, e: usize) -> MergedAdu {
        MergedAdu::single(AduSpan::new(id, t, s, e))
    }

    fn span_of(text: &str, needle: &str) -> (usize, usize) {
        let b = text.find(needle).unwrap();
        let s = text[..b].chars().count();
        (s, s + needle.chars().count())
    }

    #[test]
    fn because_is_not_a_connector() {
        let text = "results improve because the data is clean.";
        let (a, b) = (span_of(text, "results improve"), span_of(text, "the data is clean"));
        let x = unit("x", AduType::OwnClaim, a.0, a.1);
        let y = unit("y", AduType::Data, b.0, b.1);
        assert_eq!(connector(text, &x, &y), "NONE");
        assert!(same_sentence(text, &x, &y));
    }

    #[test]
    fn however_before_head() {
        let text = "Prior work holds. However, this fails on noisy data and we disagree.";
        let (a, b) = (span_of(text, "this fails on noisy data"), span_of(text, "we disagree"));
        let x = unit("x", AduType::OwnClaim, a.0, a.1);
        let y = unit("y", AduType::OwnClaim, b.0, b.1);
        assert_eq!(connector(text, &x, &y), "however");
    }

    #[test]
    fn longest_phrase_and_brackets() {
        assert_eq!(find_connector("even though it"), Some("even though"));
        assert_eq!(find_connector("and though"), Some("though"));
        assert_eq!(find_connector("In contrast ,"), Some("in contrast"));
        let text = "alpha (beta) gamma";
        let x = unit("x", AduType::Data, 0, 5);
        let y = unit("y", AduType::Data, 13, 18);
        assert_eq!(connector(text, &x, &y), "BRACKETS");
    }

    #[test]
    fn sentence_split() {
        let text = "One. Two! Three? Four";
        assert_eq!(sentence_index(text, 0), 0);
        assert_eq!(sentence_index(text, 5), 1);
        assert_eq!(sentence_index(text, 17), 3);
    }

    #[test]
    fn tally_categories() {
        let text = "we claim a but we claim b. data c shows it.";
        let key = SectionKey {
            doc_id: "D".into(),
            index: 0,
        };
        let frags = vec![
            AduSpan::new("a", AduType::OwnClaim, 0, 10),
            AduSpan::new("b", AduType::OwnClaim, 15, 25),
            AduSpan::new("c", AduType::Data, 27, 42),
        ];
        let gold = ArgumentGraph::from_fragments(
            key.clone(),
            &frags,
            &[
                Relation::new("a", "b", RelationLabel::Contradicts),
                Relation::new("c", "b", RelationLabel::Supports),
            ],
        );
        let pred = ArgumentGraph::from_fragments(
            key,
            &frags,
            &[
                Relation::new("b", "a", RelationLabel::Contradicts),
                Relation::new("c", "a", RelationLabel::Supports),
            ],
        );
        let r = error_feature_report(&pred, &gold, text, MatchMode::Exact);
        assert_eq!(r.tp.total, 1);
        assert_eq!(r.tp.connectors["but"], 1);
        assert_eq!(r.tp.same_sentence["true"], 1);
        assert_eq!(r.fp.total, 1);
        assert_eq!(r.fp.arg_types["data-own_claim"], 1);
        assert_eq!(r.fp.same_sentence["false"], 1);
        assert_eq!(r.fn_.total, 1);
        // "but" precedes b inside its sentence
        assert_eq!(r.fn_.connectors["but"], 1);
    }
}
