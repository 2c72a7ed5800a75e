//! Sections turned into model inputs: tokens, token-aligned gold spans and
//! embedding features.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{AduSpan, Document, Relation, RelationLabel, Section, SectionKey};
use crate::embed::{EmbedError, EmbeddingSource};
use crate::tagging::{align_spans, encode_token_spans, tokenize, Scheme, TagSequence, Token, TokenSpan};

/// Gold ADU fragment on token indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAdu {
    pub id: String,
    pub span: TokenSpan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedSection {
    pub key: SectionKey,
    pub text: String,
    pub tokens: Vec<Token>,
    /// Character-level gold fragments, section-local.
    pub adus: Vec<AduSpan>,
    /// Gold relations inside the section, `semantically_same` removed.
    pub relations: Vec<Relation>,
    /// Gold fragments aligned to tokens, sorted, non-overlapping.
    pub token_adus: Vec<TokenAdu>,
}

impl PreparedSection {
    pub fn new(section: &Section) -> Self {
        let tokens = tokenize(&section.text);
        let mut aligned = align_spans(&tokens, &section.adus);
        aligned.sort_by(|a, b| (a.0.start, a.0.end, &a.1).cmp(&(b.0.start, b.0.end, &b.1)));
        let mut token_adus: Vec<TokenAdu> = Vec::with_capacity(aligned.len());
        for (span, id) in aligned {
            if let Some(prev) = token_adus.last() {
                if span.start < prev.span.end {
                    log::warn!("{}: ADU {id} overlaps {} after token alignment, dropped", section.key(), prev.id);
                    continue;
                }
            }
            token_adus.push(TokenAdu { id, span });
        }
        let kept: std::collections::HashSet<&str> = token_adus.iter().map(|a| a.id.as_str()).collect();
        let relations = section
            .relations
            .iter()
            .filter(|r| r.label != RelationLabel::SemanticallySame)
            .filter(|r| kept.contains(r.head.as_str()) && kept.contains(r.tail.as_str()))
            .cloned()
            .collect();
        let adus = section
            .adus
            .iter()
            .filter(|a| kept.contains(a.id.as_str()))
            .cloned()
            .collect();
        Self {
            key: section.key(),
            text: section.text.clone(),
            tokens,
            adus,
            relations,
            token_adus,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_spans(&self) -> Vec<TokenSpan> {
        self.token_adus.iter().map(|a| a.span).collect()
    }

    pub fn gold_tags(&self, scheme: Scheme) -> TagSequence {
        encode_token_spans(self.tokens.len(), &self.token_spans(), scheme)
    }
}

pub fn prepare_documents(docs: &[Document]) -> Vec<PreparedSection> {
    docs.iter().flat_map(|d| &d.sections).map(PreparedSection::new).collect()
}

/// Frozen token features as f64, one row per token.
pub fn embed_section(source: &dyn EmbeddingSource, section: &PreparedSection) -> Result<Array2<f64>, EmbedError> {
    let m = source.embed(&section.key, &section.tokens)?;
    Ok(m.mapv(f64::from))
}

pub fn embed_all(source: &dyn EmbeddingSource, sections: &[PreparedSection]) -> Result<Vec<Array2<f64>>, EmbedError> {
    sections.iter().map(|s| embed_section(source, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AduType;

    fn section() -> Section {
        Section {
            doc_id: "D".into(),
            index: 0,
            char_start: 0,
            char_end: 31,
            text: "we claim this because data show".into(),
            adus: vec![
                AduSpan::new("a", AduType::OwnClaim, 0, 13),
                AduSpan::new("b", AduType::Data, 22, 31),
                AduSpan::new("c", AduType::Data, 25, 31),
            ],
            relations: vec![
                Relation::new("b", "a", RelationLabel::Supports),
                Relation::new("c", "a", RelationLabel::Supports),
                Relation::new("a", "b", RelationLabel::SemanticallySame),
            ],
        }
    }

    #[test]
    fn overlapping_and_semantically_same_removed() {
        let p = PreparedSection::new(&section());
        assert_eq!(p.len(), 6);
        let ids: Vec<&str> = p.token_adus.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(p.token_adus[0].span, TokenSpan::new(0, 3, AduType::OwnClaim));
        assert_eq!(p.relations, vec![Relation::new("b", "a", RelationLabel::Supports)]);
        assert_eq!(p.gold_tags(Scheme::Bioul).to_string(), "B-own_claim I-own_claim L-own_claim O B-data L-data");
    }
}

/// A section paired with its frozen token features.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub section: &'a PreparedSection,
    pub features: &'a Array2<f64>,
}

/// Pairs sections with features; the slices must have equal length.
pub fn examples<'a>(sections: &'a [PreparedSection], features: &'a [Array2<f64>]) -> Vec<Example<'a>> {
    assert_eq!(sections.len(), features.len(), "one feature matrix per section");
    sections.iter().zip(features).map(|(section, features)| Example { section, features }).collect()
}
