//! Small generated corpora with a learnable signal: the first word of a unit
//! fixes its type and the word joining two units fixes their relation.

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::reader::write_gate_xml;
use crate::corpus::{AduSpan, AduType, RawDocument, Relation, RelationLabel};

pub const MARKERS: [(&str, AduType); 3] = [
    ("previously", AduType::BackgroundClaim),
    ("we", AduType::OwnClaim),
    ("figure", AduType::Data),
];

const CONTENT: [&str; 12] = [
    "results", "model", "improves", "accuracy", "shows", "method", "noise", "error", "sampling", "fails", "stable", "faster",
];

const FILLER: [&str; 4] = ["then", "also", "so", "next"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub docs: usize,
    pub sections_per_doc: usize,
    pub sentences_per_section: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            docs: 5,
            sections_per_doc: 4,
            sentences_per_section: 3,
            seed: 1,
        }
    }
}

struct Builder {
    text: String,
    adus: Vec<AduSpan>,
    relations: Vec<Relation>,
}

impl Builder {
    fn len(&self) -> usize {
        self.text.chars().count()
    }

    fn word(&mut self, w: &str) {
        if !self.text.is_empty() && !self.text.ends_with(['>', ' ']) {
            self.text.push(' ');
        }
        self.text.push_str(w);
    }

    fn unit(&mut self, rng: &mut ChaCha8Rng) -> String {
        let (marker, t) = *MARKERS.choose(rng).expect("markers");
        self.word("");
        let start = self.len();
        self.text.push_str(marker);
        for _ in 0..rng.random_range(2..=4) {
            self.word(CONTENT.choose(rng).expect("content"));
        }
        let id = format!("T{}", self.adus.len() + 1);
        self.adus.push(AduSpan::new(id.clone(), t, start, self.len()));
        id
    }
}

const HEADER_PREFIX: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?><Document xmlns:gate=\"http://www.gate.ac.uk\" name=\"";

/// Documents `S1..Sn`, each with a GATE-style header and `<H1>` sections.
///
/// Sentences are a lone unit, `A because B` (B supports A) or
/// `A however B` (B contradicts A), optionally opened by a filler word.
pub fn generate(spec: &SyntheticSpec) -> Vec<RawDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (1..=spec.docs)
        .map(|d| {
            let id = format!("S{d}");
            let mut b = Builder {
                text: format!("{HEADER_PREFIX}{id}\">"),
                adus: Vec::new(),
                relations: Vec::new(),
            };
            for s in 1..=spec.sections_per_doc {
                b.text.push_str(&format!("<H1>Part {s}</H1>"));
                for _ in 0..spec.sentences_per_section {
                    if rng.random_bool(0.3) {
                        b.word(FILLER.choose(&mut rng).expect("filler"));
                    }
                    let first = b.unit(&mut rng);
                    match rng.random_range(0..3) {
                        0 => {}
                        1 => {
                            b.word("because");
                            let second = b.unit(&mut rng);
                            b.relations.push(Relation::new(second, first, RelationLabel::Supports));
                        }
                        _ => {
                            b.word("however");
                            let second = b.unit(&mut rng);
                            b.relations.push(Relation::new(second, first, RelationLabel::Contradicts));
                        }
                    }
                    b.text.push_str(" .");
                }
                b.text.push('\n');
            }
            RawDocument {
                id,
                raw_text: b.text,
                adus: b.adus,
                relations: b.relations,
            }
        })
        .collect()
}

/// Writes every document as `{id}.xml`.
pub fn write_corpus(dir: &Path, docs: &[RawDocument]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for doc in docs {
        std::fs::write(dir.join(format!("{}.xml", doc.id)), write_gate_xml(doc))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_document, parse_corpus};
    use crate::data::prepare_documents;

    #[test]
    fn twenty_sections_with_markers() {
        let docs: Vec<_> = generate(&SyntheticSpec::default()).into_iter().map(|r| build_document(r).unwrap()).collect();
        let sections = prepare_documents(&docs);
        assert_eq!(sections.len(), 20);
        for s in &sections {
            assert!(s.text.starts_with("<H1>"));
            assert_eq!(s.token_adus.len(), s.adus.len());
            for a in &s.adus {
                let covered: String = s.text.chars().skip(a.start).take(a.end - a.start).collect();
                let marker = covered.split(' ').next().unwrap();
                assert_eq!(MARKERS.iter().find(|m| m.0 == marker).unwrap().1, a.adu_type);
            }
        }
        assert!(docs.iter().all(|d| d.dropped_adus == 0 && d.dropped_relations == 0));
    }

    #[test]
    fn written_corpus_parses_back() {
        let spec = SyntheticSpec { docs: 2, ..SyntheticSpec::default() };
        let raw = generate(&spec);
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &raw).unwrap();
        let docs = parse_corpus(dir.path()).unwrap();
        assert_eq!(docs.len(), 2);
        for (d, r) in docs.iter().zip(&raw) {
            assert_eq!(d.id, r.id);
            assert_eq!(d.adus.len(), r.adus.len());
            assert_eq!(d.relations, r.relations);
        }
        assert_eq!(generate(&spec), raw);
    }
}
