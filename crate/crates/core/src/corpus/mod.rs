//! Annotated corpus model, file ingestion and preprocessing.

mod merge;
mod model;
mod preprocess;
pub mod reader;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use merge::merge_parts_of_same;
pub use model::{byte_offset, char_slice, AduSpan, AduType, Document, MergedAdu, Relation, RelationLabel, Section, SectionKey};
pub use preprocess::{split_sections, strip_header, StrippedText};
pub use reader::RawDocument;

/// File whose annotations cannot be parsed; excluded by id.
pub const EXCLUDED_DOC_IDS: &[&str] = &["A28"];
pub const TRAIN_DOCS: usize = 30;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{doc_id}: malformed input: {message}")]
    Malformed { doc_id: String, message: String },
    #[error("{doc_id}: ADU {adu_id} span [{start}, {end}) out of bounds for text of {len} chars")]
    OffsetOutOfBounds {
        doc_id: String,
        adu_id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("{doc_id}: relation references unknown ADU {adu_id}")]
    UnknownAdu { doc_id: String, adu_id: String },
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("need at least {needed} documents for the split, got {got}")]
    TooFewDocuments { needed: usize, got: usize },
    #[error("line {line}: {message}")]
    Jsonl { line: usize, message: String },
}

/// Strips the header, remaps offsets and splits into sections.
///
/// ADUs crossing a section boundary and relations whose endpoints land in
/// different sections are dropped from `sections` and counted.
pub fn build_document(raw: RawDocument) -> Result<Document, CorpusError> {
    let stripped = strip_header(&raw.raw_text);
    let shift = stripped.removed_chars;
    let text_len = stripped.text.chars().count();

    let mut adus = Vec::with_capacity(raw.adus.len());
    for adu in &raw.adus {
        if adu.start < shift || adu.end - shift > text_len {
            return Err(CorpusError::OffsetOutOfBounds {
                doc_id: raw.id.clone(),
                adu_id: adu.id.clone(),
                start: adu.start,
                end: adu.end,
                len: text_len + shift,
            });
        }
        adus.push(AduSpan::new(adu.id.clone(), adu.adu_type, adu.start - shift, adu.end - shift));
    }

    let ranges = split_sections(&stripped.text);
    let mut sections: Vec<Section> = ranges
        .iter()
        .enumerate()
        .map(|(index, &(s, e))| Section {
            doc_id: raw.id.clone(),
            index,
            char_start: s,
            char_end: e,
            text: char_slice(&stripped.text, s, e),
            adus: Vec::new(),
            relations: Vec::new(),
        })
        .collect();

    let mut home: HashMap<&str, usize> = HashMap::new();
    let mut dropped_adus = 0;
    for adu in &adus {
        match ranges.iter().position(|&(s, e)| s <= adu.start && adu.end <= e) {
            Some(i) => {
                let (s, _) = ranges[i];
                sections[i]
                    .adus
                    .push(AduSpan::new(adu.id.clone(), adu.adu_type, adu.start - s, adu.end - s));
                home.insert(adu.id.as_str(), i);
            }
            None => {
                log::warn!("{}: ADU {} crosses a section boundary, dropped", raw.id, adu.id);
                dropped_adus += 1;
            }
        }
    }
    for section in &mut sections {
        section.adus.sort_by(|a, b| (a.start, a.end, &a.id).cmp(&(b.start, b.end, &b.id)));
    }

    let mut dropped_relations = 0;
    for rel in &raw.relations {
        match (home.get(rel.head.as_str()), home.get(rel.tail.as_str())) {
            (Some(h), Some(t)) if h == t => sections[*h].relations.push(rel.clone()),
            _ => dropped_relations += 1,
        }
    }
    if dropped_relations > 0 {
        log::info!("{}: dropped {dropped_relations} cross-section relations", raw.id);
    }

    Ok(Document {
        id: raw.id,
        raw_text: raw.raw_text,
        header_chars: shift,
        text: stripped.text,
        adus,
        relations: raw.relations,
        sections,
        dropped_relations,
        dropped_adus,
    })
}

/// Sort key that orders `A2` before `A10`.
pub fn corpus_order_key(id: &str) -> (String, u64, String) {
    let digits_at = id.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let number = id[digits_at..].parse().unwrap_or(0);
    (id[..digits_at].to_string(), number, id.to_string())
}

/// Corpus files in a directory, sorted by corpus id, excluded ids removed.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let ext = path.extension().and_then(|e| e.to_str());
        let wanted = match ext {
            Some("xml") => true,
            Some("txt") => path.with_extension("ann").exists(),
            _ => false,
        };
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        if wanted && !EXCLUDED_DOC_IDS.contains(&id) {
            files.push(path);
        }
    }
    files.sort_by_key(|p| corpus_order_key(p.file_stem().and_then(|s| s.to_str()).unwrap_or_default()));
    Ok(files)
}

/// Parses every corpus file in `dir`. Files are independent, so they are read in parallel.
pub fn parse_corpus(dir: &Path) -> Result<Vec<Document>, CorpusError> {
    let files = corpus_files(dir)?;
    let parsed: Vec<Result<Document, CorpusError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = files
            .iter()
            .map(|path| scope.spawn(move || reader::read_file(path).and_then(build_document)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("parser thread panicked"))
            .collect()
    });
    parsed.into_iter().collect()
}

/// First [`TRAIN_DOCS`] documents train, the rest test.
pub fn make_split(docs: &[Document]) -> Result<(Vec<Document>, Vec<Document>), CorpusError> {
    if docs.len() <= TRAIN_DOCS {
        return Err(CorpusError::TooFewDocuments {
            needed: TRAIN_DOCS + 1,
            got: docs.len(),
        });
    }
    let mut sorted = docs.to_vec();
    sorted.sort_by_key(|d| corpus_order_key(&d.id));
    let test = sorted.split_off(TRAIN_DOCS);
    Ok((sorted, test))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelStats {
    pub adus: BTreeMap<AduType, usize>,
    pub relations: BTreeMap<RelationLabel, usize>,
}

impl LabelStats {
    pub fn adu(&self, t: AduType) -> usize {
        self.adus.get(&t).copied().unwrap_or(0)
    }

    pub fn relation(&self, l: RelationLabel) -> usize {
        self.relations.get(&l).copied().unwrap_or(0)
    }
}

/// Per-class annotation counts over whole documents (before the section filter).
pub fn label_stats(docs: &[Document]) -> LabelStats {
    let mut stats = LabelStats::default();
    for t in AduType::ALL {
        stats.adus.insert(t, 0);
    }
    for l in RelationLabel::ALL {
        stats.relations.insert(l, 0);
    }
    for doc in docs {
        for adu in &doc.adus {
            *stats.adus.entry(adu.adu_type).or_default() += 1;
        }
        for rel in &doc.relations {
            *stats.relations.entry(rel.label).or_default() += 1;
        }
    }
    stats
}

/// Published label counts of the corpus (train, test) with A28 excluded.
pub struct ReferenceCounts {
    pub adus: [(AduType, usize, usize); 3],
    pub relations: [(RelationLabel, usize, usize); 4],
}

pub const TABLE1: ReferenceCounts = ReferenceCounts {
    adus: [
        (AduType::BackgroundClaim, 2563, 661),
        (AduType::OwnClaim, 4608, 1241),
        (AduType::Data, 3346, 858),
    ],
    relations: [
        (RelationLabel::Supports, 4426, 1260),
        (RelationLabel::Contradicts, 551, 133),
        (RelationLabel::SemanticallySame, 36, 3),
        (RelationLabel::PartsOfSame, 1000, 269),
    ],
};

/// Compares parsed counts with [`TABLE1`]; returns one message per mismatch.
pub fn verify_table1(docs: &[Document]) -> Result<Vec<String>, CorpusError> {
    let mut problems = Vec::new();
    if docs.len() != 39 {
        problems.push(format!("expected 39 documents, found {}", docs.len()));
    }
    let (train, test) = make_split(docs)?;
    if train.len() != 30 || test.len() != 9 {
        problems.push(format!("expected 30/9 split, got {}/{}", train.len(), test.len()));
    }
    let (tr, te) = (label_stats(&train), label_stats(&test));
    for (t, n_train, n_test) in TABLE1.adus {
        for (split, want, got) in [("train", n_train, tr.adu(t)), ("test", n_test, te.adu(t))] {
            if want != got {
                problems.push(format!("{t} ({split}): expected {want}, found {got}"));
            }
        }
    }
    for (l, n_train, n_test) in TABLE1.relations {
        for (split, want, got) in [("train", n_train, tr.relation(l)), ("test", n_test, te.relation(l))] {
            if want != got {
                problems.push(format!("{l} ({split}): expected {want}, found {got}"));
            }
        }
    }
    Ok(problems)
}

/// One section per line.
pub fn write_sections_jsonl<W: Write>(docs: &[Document], mut out: W) -> std::io::Result<()> {
    for section in docs.iter().flat_map(|d| &d.sections) {
        serde_json::to_writer(&mut out, section)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Inverse of [`write_sections_jsonl`]. Documents are rebuilt from their
/// sections, so relations dropped during preprocessing are not recovered.
pub fn read_sections_jsonl<R: BufRead>(input: R) -> Result<Vec<Document>, CorpusError> {
    let mut grouped: BTreeMap<(String, u64, String), Vec<Section>> = BTreeMap::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Jsonl {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let section: Section = serde_json::from_str(&line).map_err(|e| CorpusError::Jsonl {
            line: i + 1,
            message: e.to_string(),
        })?;
        grouped.entry(corpus_order_key(&section.doc_id)).or_default().push(section);
    }
    Ok(grouped
        .into_values()
        .map(|mut sections| {
            sections.sort_by_key(|s| s.index);
            let text: String = sections.iter().map(|s| s.text.as_str()).collect();
            let adus = sections
                .iter()
                .flat_map(|s| {
                    s.adus
                        .iter()
                        .map(move |a| AduSpan::new(a.id.clone(), a.adu_type, a.start + s.char_start, a.end + s.char_start))
                })
                .collect();
            let relations = sections.iter().flat_map(|s| s.relations.clone()).collect();
            Document {
                id: sections[0].doc_id.clone(),
                raw_text: text.clone(),
                header_chars: 0,
                text,
                adus,
                relations,
                sections,
                dropped_relations: 0,
                dropped_adus: 0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn raw_fixture() -> RawDocument {
        let header = "<?xml version=\"1.0\"?>\n<Document xmlns:gate=\"http://www.gate.ac.uk\" name=\"A01\">\n";
        let body = "<Title>T</Title>intro<H1>Methods</H1>We claim X because Y.<H1>End</H1>Z holds.";
        let raw_text = format!("{header}{body}");
        let off = header.chars().count();
        let at = |needle: &str| off + body.find(needle).unwrap();
        RawDocument {
            id: "A01".into(),
            raw_text,
            adus: vec![
                AduSpan::new("T1", AduType::OwnClaim, at("claim X"), at("claim X") + 7),
                AduSpan::new("T2", AduType::Data, at("Y."), at("Y.") + 1),
                AduSpan::new("T3", AduType::BackgroundClaim, at("Z holds"), at("Z holds") + 7),
            ],
            relations: vec![
                Relation::new("T2", "T1", RelationLabel::Supports),
                Relation::new("T3", "T1", RelationLabel::SemanticallySame),
            ],
        }
    }

    #[test]
    fn build_remaps_and_sections() {
        let raw = raw_fixture();
        let doc = build_document(raw.clone()).unwrap();
        assert!(doc.text.starts_with("<Title>"));
        assert_eq!(doc.sections.len(), 3);
        assert_eq!(doc.dropped_relations, 1);
        let methods = &doc.sections[1];
        assert_eq!(methods.adus.len(), 2);
        assert_eq!(methods.relations.len(), 1);
        for section in &doc.sections {
            for adu in &section.adus {
                let orig = raw.adus.iter().find(|a| a.id == adu.id).unwrap();
                assert_eq!(
                    section.covered_text(adu.start, adu.end),
                    char_slice(&raw.raw_text, orig.start, orig.end)
                );
            }
        }
        let joined: String = doc.sections.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(joined, doc.text);
    }

    #[test]
    fn split_counts() {
        let docs: Vec<Document> = (1..=31)
            .map(|i| {
                let mut raw = raw_fixture();
                raw.id = format!("A{i:02}");
                build_document(raw).unwrap()
            })
            .collect();
        let (train, test) = make_split(&docs).unwrap();
        assert_eq!((train.len(), test.len()), (30, 1));
        assert_eq!(test[0].id, "A31");
        assert!(matches!(
            make_split(&docs[..30]),
            Err(CorpusError::TooFewDocuments { got: 30, .. })
        ));
    }

    #[test]
    fn stats_on_fixture_and_empty() {
        let doc = build_document(raw_fixture()).unwrap();
        let stats = label_stats(&[doc]);
        assert_eq!(stats.adu(AduType::OwnClaim), 1);
        assert_eq!(stats.relation(RelationLabel::Supports), 1);
        assert_eq!(stats.relation(RelationLabel::SemanticallySame), 1);
        let empty = label_stats(&[]);
        assert!(empty.adus.values().chain(empty.relations.values()).all(|&n| n == 0));
    }

    #[test]
    fn order_key_is_numeric() {
        let mut ids = vec!["A10", "A2", "A01"];
        ids.sort_by_key(|s| corpus_order_key(s));
        assert_eq!(ids, vec!["A01", "A2", "A10"]);
    }

    #[test]
    fn jsonl_round_trip() {
        let doc = build_document(raw_fixture()).unwrap();
        let mut buf = Vec::new();
        write_sections_jsonl(std::slice::from_ref(&doc), &mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
        let back = read_sections_jsonl(&buf[..]).unwrap();
        assert_eq!(back[0].sections, doc.sections);
        assert_eq!(back[0].text, doc.text);
    }

    #[test]
    fn header_annotation_is_out_of_bounds() {
        let mut raw = raw_fixture();
        raw.adus[0].start = 2;
        assert!(matches!(build_document(raw), Err(CorpusError::OffsetOutOfBounds { .. })));
    }
}
