use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three argumentative unit classes annotated in Sci-Arg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AduType {
    BackgroundClaim,
    OwnClaim,
    Data,
}

impl AduType {
    pub const ALL: [AduType; 3] = [AduType::BackgroundClaim, AduType::OwnClaim, AduType::Data];

    pub fn as_str(self) -> &'static str {
        match self {
            AduType::BackgroundClaim => "background_claim",
            AduType::OwnClaim => "own_claim",
            AduType::Data => "data",
        }
    }

    pub fn index(self) -> usize {
        match self {
            AduType::BackgroundClaim => 0,
            AduType::OwnClaim => 1,
            AduType::Data => 2,
        }
    }
}

impl fmt::Display for AduType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AduType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "background_claim" => Ok(AduType::BackgroundClaim),
            "own_claim" => Ok(AduType::OwnClaim),
            "data" => Ok(AduType::Data),
            other => Err(format!("unknown ADU type `{other}`")),
        }
    }
}

/// Relation labels as annotated in the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationLabel {
    Supports,
    Contradicts,
    SemanticallySame,
    PartsOfSame,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; 4] = [
        RelationLabel::Supports,
        RelationLabel::Contradicts,
        RelationLabel::SemanticallySame,
        RelationLabel::PartsOfSame,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationLabel::Supports => "supports",
            RelationLabel::Contradicts => "contradicts",
            RelationLabel::SemanticallySame => "semantically_same",
            RelationLabel::PartsOfSame => "parts_of_same",
        }
    }

    /// Symmetric labels are kept unchanged when a pair is reversed.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, RelationLabel::Supports)
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "supports" => Ok(RelationLabel::Supports),
            "contradicts" => Ok(RelationLabel::Contradicts),
            "semantically_same" => Ok(RelationLabel::SemanticallySame),
            "parts_of_same" => Ok(RelationLabel::PartsOfSame),
            other => Err(format!("unknown relation label `{other}`")),
        }
    }
}

/// An annotated argumentative unit. Offsets are character offsets, end exclusive.
///
/// Inside a [`Section`] the offsets are relative to the section text; in
/// [`Document::adus`] they are relative to the header-stripped document text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AduSpan {
    pub id: String,
    #[serde(rename = "type")]
    pub adu_type: AduType,
    pub start: usize,
    pub end: usize,
}

impl AduSpan {
    pub fn new(id: impl Into<String>, adu_type: AduType, start: usize, end: usize) -> Self {
        Self {
            id: id.into(),
            adu_type,
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &AduSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub head: String,
    pub tail: String,
    pub label: RelationLabel,
}

impl Relation {
    pub fn new(head: impl Into<String>, tail: impl Into<String>, label: RelationLabel) -> Self {
        Self {
            head: head.into(),
            tail: tail.into(),
            label,
        }
    }
}

/// One `<H1>`-delimited slice of a document; the unit every model operates on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub doc_id: String,
    pub index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    pub adus: Vec<AduSpan>,
    pub relations: Vec<Relation>,
}

impl Section {
    pub fn key(&self) -> SectionKey {
        SectionKey {
            doc_id: self.doc_id.clone(),
            index: self.index,
        }
    }

    pub fn adu(&self, id: &str) -> Option<&AduSpan> {
        self.adus.iter().find(|a| a.id == id)
    }

    /// Surface string of a section-local span.
    pub fn covered_text(&self, start: usize, end: usize) -> String {
        char_slice(&self.text, start, end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SectionKey {
    pub doc_id: String,
    pub index: usize,
}

impl fmt::Display for SectionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.doc_id, self.index)
    }
}

/// A parsed corpus file.
///
/// `text` is the header-stripped body. `adus` and `relations` hold every
/// annotation at document level (offsets into `text`), including relations
/// that were dropped from `sections` because they cross a section boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub header_chars: usize,
    pub text: String,
    pub adus: Vec<AduSpan>,
    pub relations: Vec<Relation>,
    pub sections: Vec<Section>,
    pub dropped_relations: usize,
    pub dropped_adus: usize,
}

/// A (possibly non-contiguous) unit built from fragments joined by `parts_of_same`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MergedAdu {
    /// Id of the representative fragment (the one with the smallest start).
    pub id: String,
    #[serde(rename = "type")]
    pub adu_type: AduType,
    pub fragments: Vec<AduSpan>,
}

impl MergedAdu {
    pub fn single(adu: AduSpan) -> Self {
        Self {
            id: adu.id.clone(),
            adu_type: adu.adu_type,
            fragments: vec![adu],
        }
    }

    pub fn start(&self) -> usize {
        self.fragments.first().map_or(0, |f| f.start)
    }

    pub fn end(&self) -> usize {
        self.fragments.iter().map(|f| f.end).max().unwrap_or(0)
    }

    pub fn char_len(&self) -> usize {
        self.fragments.iter().map(AduSpan::len).sum()
    }
}

/// Character-offset slice of a string.
pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}

/// Byte offset of the `char_idx`-th character (or `text.len()` past the end).
pub fn byte_offset(text: &str, char_idx: usize) -> usize {
    text.char_indices()
        .nth(char_idx)
        .map_or(text.len(), |(b, _)| b)
}
