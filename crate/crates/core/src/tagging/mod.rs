//! Tokenization and span <-> tag sequence conversion (BIO2 / BIOUL).

mod scheme;
mod tokenize;

pub use scheme::{Scheme, Tag, TagSequence};
pub use tokenize::{tokenize, Token, TokenizedSection};

use crate::corpus::{AduSpan, AduType};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TaggingError {
    #[error("ADUs {first} and {second} overlap")]
    Overlap { first: String, second: String },
    #[error("tag sequence has {tags} tags for {tokens} tokens")]
    LengthMismatch { tags: usize, tokens: usize },
    #[error("cannot parse tag `{0}`")]
    BadTag(String),
}

/// A typed span over token indices, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
    pub adu_type: AduType,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize, adu_type: AduType) -> Self {
        Self { start, end, adu_type }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Maps character spans onto the tokens they touch.
///
/// A boundary that falls inside a token is widened to cover the whole token.
/// ADUs covering no token at all are skipped. Returns spans paired with their
/// source ids, in input order.
pub fn align_spans(tokens: &[Token], adus: &[AduSpan]) -> Vec<(TokenSpan, String)> {
    let mut out = Vec::with_capacity(adus.len());
    for adu in adus {
        let first = tokens.partition_point(|t| t.end <= adu.start);
        let last = tokens.partition_point(|t| t.start < adu.end);
        if first >= last {
            log::warn!("ADU {} covers no token, skipped", adu.id);
            continue;
        }
        if tokens[first].start != adu.start || tokens[last - 1].end != adu.end {
            log::debug!("ADU {} widened to token boundaries", adu.id);
        }
        out.push((TokenSpan::new(first, last, adu.adu_type), adu.id.clone()));
    }
    out
}

/// Tags `adus` over `tokens` under `scheme`. Overlapping units are rejected.
pub fn encode_spans(tokens: &[Token], adus: &[AduSpan], scheme: Scheme) -> Result<TagSequence, TaggingError> {
    let mut aligned = align_spans(tokens, adus);
    aligned.sort_by_key(|(s, _)| (s.start, s.end));
    for pair in aligned.windows(2) {
        if pair[1].0.start < pair[0].0.end {
            return Err(TaggingError::Overlap {
                first: pair[0].1.clone(),
                second: pair[1].1.clone(),
            });
        }
    }
    let spans: Vec<TokenSpan> = aligned.into_iter().map(|(s, _)| s).collect();
    Ok(encode_token_spans(tokens.len(), &spans, scheme))
}

/// Tags already aligned, non-overlapping token spans.
pub fn encode_token_spans(n_tokens: usize, spans: &[TokenSpan], scheme: Scheme) -> TagSequence {
    let mut tags = vec![Tag::Outside; n_tokens];
    for span in spans {
        let t = span.adu_type;
        if span.len() == 1 {
            tags[span.start] = match scheme {
                Scheme::Bio2 => Tag::Begin(t),
                Scheme::Bioul => Tag::Unit(t),
            };
            continue;
        }
        tags[span.start] = Tag::Begin(t);
        for tag in &mut tags[span.start + 1..span.end] {
            *tag = Tag::Inside(t);
        }
        if scheme == Scheme::Bioul {
            tags[span.end - 1] = Tag::Last(t);
        }
    }
    TagSequence { scheme, tags }
}

/// Extracts spans from any tag sequence.
///
/// Invalid sequences are repaired: an `I`/`L` that does not continue an open
/// span of its class starts a new one (`I` acts as `B`, `L` as `U`); a class
/// change closes the open span.
pub fn decode_token_spans(tags: &[Tag]) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, AduType)> = None;
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            Tag::Outside => {
                if let Some((s, t)) = open.take() {
                    spans.push(TokenSpan::new(s, i, t));
                }
            }
            Tag::Begin(t) => {
                if let Some((s, ot)) = open.take() {
                    spans.push(TokenSpan::new(s, i, ot));
                }
                open = Some((i, t));
            }
            Tag::Inside(t) => match open {
                Some((_, ot)) if ot == t => {}
                _ => {
                    if let Some((s, ot)) = open.take() {
                        spans.push(TokenSpan::new(s, i, ot));
                    }
                    open = Some((i, t));
                }
            },
            Tag::Last(t) => match open.take() {
                Some((s, ot)) if ot == t => spans.push(TokenSpan::new(s, i + 1, t)),
                other => {
                    if let Some((s, ot)) = other {
                        spans.push(TokenSpan::new(s, i, ot));
                    }
                    spans.push(TokenSpan::new(i, i + 1, t));
                }
            },
            Tag::Unit(t) => {
                if let Some((s, ot)) = open.take() {
                    spans.push(TokenSpan::new(s, i, ot));
                }
                spans.push(TokenSpan::new(i, i + 1, t));
            }
        }
    }
    if let Some((s, t)) = open {
        spans.push(TokenSpan::new(s, tags.len(), t));
    }
    spans
}

/// Decodes tags into character-offset ADUs named `{id_prefix}{n}`.
pub fn decode_tags(tags: &TagSequence, tokens: &[Token], id_prefix: &str) -> Result<Vec<AduSpan>, TaggingError> {
    if tags.tags.len() != tokens.len() {
        return Err(TaggingError::LengthMismatch {
            tags: tags.tags.len(),
            tokens: tokens.len(),
        });
    }
    Ok(token_spans_to_adus(&decode_token_spans(&tags.tags), tokens, id_prefix))
}

pub fn token_spans_to_adus(spans: &[TokenSpan], tokens: &[Token], id_prefix: &str) -> Vec<AduSpan> {
    spans
        .iter()
        .enumerate()
        .map(|(i, s)| {
            AduSpan::new(
                format!("{id_prefix}{}", i + 1),
                s.adu_type,
                tokens[s.start].start,
                tokens[s.end - 1].end,
            )
        })
        .collect()
}
