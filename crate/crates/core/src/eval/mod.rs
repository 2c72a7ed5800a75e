//! Scoring: token and span F1 for ADUs, relation F1, detection/classification
//! decomposition, confusion matrices, bootstrap comparison and error features.

mod bootstrap;
mod features;
mod relation;
mod span;
mod token;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap_compare, sign_flip_p_value, BootstrapError, BootstrapResult, SIGN_FLIP_ROUNDS};
pub use features::{connector, error_feature_report, sentence_index, ErrorFeatureReport, FeatureCounts, CONNECTORS};
pub use relation::{
    align_adus, parts_of_same_counts, relation_confusion, relation_counts, relation_decomposition, RELATION_LABELS,
};
pub use span::{adu_confusion, adu_decomposition, match_spans, overlap, span_counts, Denominator, MatchMode};
pub use token::{token_counts, token_labels, TokenError};

use crate::graph::ArgumentGraph;
use crate::tagging::Token;

/// True/false positive and false negative tallies for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn is_empty(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }

    pub fn prf(&self) -> Prf {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            counts: *self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: Counts,
}

/// Per-class counts keyed by class name.
pub type ClassCounts = BTreeMap<String, Counts>;

pub fn merge_counts(into: &mut ClassCounts, from: &ClassCounts) {
    for (k, c) in from {
        into.entry(k.clone()).or_default().add(*c);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub classes: BTreeMap<String, Prf>,
    /// Mean F1 over classes that occur in gold or prediction; 0 if none do.
    pub macro_f1: f64,
    pub micro: Prf,
}

impl ScoreReport {
    pub fn from_counts(counts: &ClassCounts) -> Self {
        let classes: BTreeMap<String, Prf> = counts.iter().map(|(k, c)| (k.clone(), c.prf())).collect();
        let present: Vec<f64> = counts.iter().filter(|(_, c)| !c.is_empty()).map(|(_, c)| c.prf().f1).collect();
        let macro_f1 = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        let mut total = Counts::default();
        for c in counts.values() {
            total.add(*c);
        }
        Self {
            classes,
            macro_f1,
            micro: total.prf(),
        }
    }

    /// Restricts to the named classes before averaging.
    pub fn from_counts_over(counts: &ClassCounts, classes: &[&str]) -> Self {
        let filtered: ClassCounts = classes
            .iter()
            .map(|&c| (c.to_string(), counts.get(c).copied().unwrap_or_default()))
            .collect();
        Self::from_counts(&filtered)
    }

    pub fn to_table(&self, title: &str) -> String {
        let mut out = String::new();
        let width = self.classes.keys().map(String::len).max().unwrap_or(0).max(8);
        let _ = writeln!(out, "{title}");
        let _ = writeln!(
            out,
            "{:<width$}  {:>9} {:>9} {:>9} {:>6} {:>6} {:>6}",
            "class", "precision", "recall", "f1", "tp", "fp", "fn"
        );
        let row = |out: &mut String, name: &str, p: &Prf| {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4} {:>9.4} {:>9.4} {:>6} {:>6} {:>6}",
                name, p.precision, p.recall, p.f1, p.counts.tp, p.counts.fp, p.counts.fn_
            );
        };
        for (name, p) in &self.classes {
            row(&mut out, name, p);
        }
        row(&mut out, "micro", &self.micro);
        let _ = writeln!(out, "{:<width$}  {:>9} {:>9} {:>9.4}", "macro", "", "", self.macro_f1);
        out
    }
}

/// Rows are gold labels, columns predicted labels; the last label is `none`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<usize>>,
}

pub const NONE_LABEL: &str = "none";

impl Confusion {
    pub fn new(labels: &[&str]) -> Self {
        let mut labels: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        labels.push(NONE_LABEL.to_string());
        let n = labels.len();
        Self {
            labels,
            matrix: vec![vec![0; n]; n],
        }
    }

    fn index(&self, label: Option<&str>) -> usize {
        let name = label.unwrap_or(NONE_LABEL);
        self.labels
            .iter()
            .position(|l| l == name)
            .unwrap_or_else(|| panic!("label {name} not in confusion matrix"))
    }

    pub fn record(&mut self, gold: Option<&str>, pred: Option<&str>) {
        let (g, p) = (self.index(gold), self.index(pred));
        self.matrix[g][p] += 1;
    }

    pub fn add(&mut self, other: &Confusion) {
        assert_eq!(self.labels, other.labels);
        for (row, orow) in self.matrix.iter_mut().zip(&other.matrix) {
            for (v, o) in row.iter_mut().zip(orow) {
                *v += o;
            }
        }
    }

    pub fn get(&self, gold: Option<&str>, pred: Option<&str>) -> usize {
        self.matrix[self.index(gold)][self.index(pred)]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.matrix) {
            out.push_str(l);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_table(&self) -> String {
        let width = self.labels.iter().map(String::len).max().unwrap_or(4).max(9);
        let mut out = format!("{:<width$}", "gold\\pred");
        for l in &self.labels {
            let _ = write!(out, " {l:>width$}");
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.matrix) {
            let _ = write!(out, "{l:<width$}");
            for v in row {
                let _ = write!(out, " {v:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

/// Gold and predicted graphs of one section, with the section's tokens.
#[derive(Debug, Clone)]
pub struct SectionEval<'a> {
    pub gold: &'a ArgumentGraph,
    pub pred: &'a ArgumentGraph,
    pub tokens: &'a [Token],
}

/// Every score the evaluator reports, aggregated over sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub mode: MatchMode,
    pub sections: usize,
    pub adu_tokens: ScoreReport,
    pub adu_spans: ScoreReport,
    pub adu_detection: ScoreReport,
    pub adu_classification: ScoreReport,
    pub relations: ScoreReport,
    pub relation_detection: ScoreReport,
    pub relation_classification: ScoreReport,
    pub parts_of_same: ScoreReport,
    pub adu_confusion: Confusion,
    pub relation_confusion: Confusion,
}

/// Labels scored in the relation micro average.
pub const SCORED_RELATIONS: [&str; 2] = ["supports", "contradicts"];

pub fn evaluate(sections: &[SectionEval<'_>], mode: MatchMode) -> Result<FullReport, TokenError> {
    let mut tokens = ClassCounts::new();
    let mut spans = ClassCounts::new();
    let mut det = ClassCounts::new();
    let mut cls = ClassCounts::new();
    let mut rels = ClassCounts::new();
    let mut rel_det = ClassCounts::new();
    let mut rel_cls = ClassCounts::new();
    let mut pos = ClassCounts::new();
    let adu_classes: Vec<&str> = crate::corpus::AduType::ALL.iter().map(|t| t.as_str()).collect();
    let mut adu_conf = Confusion::new(&adu_classes);
    let mut rel_conf = Confusion::new(&RELATION_LABELS);
    for s in sections {
        let gold_labels = token_labels(s.tokens, s.gold.fragments());
        let pred_labels = token_labels(s.tokens, s.pred.fragments());
        merge_counts(&mut tokens, &token_counts(&gold_labels, &pred_labels, false)?);
        merge_counts(&mut spans, &span_counts(&s.gold.adus, &s.pred.adus, mode));
        let (d, c) = adu_decomposition(&s.gold.adus, &s.pred.adus, mode);
        merge_counts(&mut det, &d);
        merge_counts(&mut cls, &c);
        merge_counts(&mut rels, &relation_counts(s.gold, s.pred, mode));
        let (d, c) = relation_decomposition(s.gold, s.pred, mode);
        merge_counts(&mut rel_det, &d);
        merge_counts(&mut rel_cls, &c);
        merge_counts(&mut pos, &parts_of_same_counts(s.gold, s.pred, mode));
        adu_conf.add(&adu_confusion(&s.gold.adus, &s.pred.adus, mode));
        rel_conf.add(&relation_confusion(s.gold, s.pred, mode));
    }
    Ok(FullReport {
        mode,
        sections: sections.len(),
        adu_tokens: ScoreReport::from_counts_over(&tokens, &adu_classes),
        adu_spans: ScoreReport::from_counts_over(&spans, &adu_classes),
        adu_detection: ScoreReport::from_counts(&det),
        adu_classification: ScoreReport::from_counts_over(&cls, &adu_classes),
        relations: ScoreReport::from_counts_over(&rels, &SCORED_RELATIONS),
        relation_detection: ScoreReport::from_counts(&rel_det),
        relation_classification: ScoreReport::from_counts_over(&rel_cls, &SCORED_RELATIONS),
        parts_of_same: ScoreReport::from_counts(&pos),
        adu_confusion: adu_conf,
        relation_confusion: rel_conf,
    })
}

impl FullReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("match mode: {}\nsections: {}\n\n", self.mode, self.sections);
        let parts = [
            ("ADU recognition, token-based", &self.adu_tokens),
            ("ADU recognition, span-based", &self.adu_spans),
            ("ADU detection (classes collapsed)", &self.adu_detection),
            ("ADU classification (detected spans)", &self.adu_classification),
            ("Relations", &self.relations),
            ("Relation detection (labels collapsed)", &self.relation_detection),
            ("Relation classification (detected pairs)", &self.relation_classification),
            ("parts_of_same", &self.parts_of_same),
        ];
        for (title, report) in parts {
            out.push_str(&report.to_table(title));
            out.push('\n');
        }
        out.push_str("ADU confusion\n");
        out.push_str(&self.adu_confusion.to_table());
        out.push_str("\nRelation confusion\n");
        out.push_str(&self.relation_confusion.to_table());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prf_arithmetic() {
        let p = Counts { tp: 2, fp: 2, fn_: 0 }.prf();
        assert_eq!((p.precision, p.recall), (0.5, 1.0));
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(Counts::default().prf().f1, 0.0);
    }

    #[test]
    fn macro_skips_absent_classes() {
        let mut c = ClassCounts::new();
        c.insert("a".into(), Counts { tp: 1, fp: 0, fn_: 0 });
        c.insert("b".into(), Counts::default());
        c.insert("c".into(), Counts { tp: 0, fp: 1, fn_: 1 });
        let r = ScoreReport::from_counts(&c);
        assert_eq!(r.macro_f1, 0.5);
        assert_eq!(r.micro.counts, Counts { tp: 1, fp: 1, fn_: 1 });
        assert_eq!(ScoreReport::from_counts(&ClassCounts::new()).macro_f1, 0.0);
    }

    #[test]
    fn confusion_csv() {
        let mut m = Confusion::new(&["x", "y"]);
        m.record(Some("x"), Some("y"));
        m.record(None, Some("x"));
        assert_eq!(m.to_csv(), "gold\\pred,x,y,none\nx,0,1,0\ny,0,0,0\nnone,1,0,0\n");
    }
}
