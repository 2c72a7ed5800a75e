use super::{ClassCounts, Counts};
use crate::corpus::{AduSpan, AduType};
use crate::tagging::Token;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TokenError {
    #[error("{gold} gold labels but {pred} predicted labels")]
    LengthMismatch { gold: usize, pred: usize },
}

/// Class of each token: the type of the first span that overlaps it.
pub fn token_labels<'a>(tokens: &[Token], spans: impl IntoIterator<Item = &'a AduSpan>) -> Vec<Option<AduType>> {
    let mut labels = vec![None; tokens.len()];
    for span in spans {
        let first = tokens.partition_point(|t| t.end <= span.start);
        for (i, tok) in tokens.iter().enumerate().skip(first) {
            if tok.start >= span.end {
                break;
            }
            labels[i].get_or_insert(span.adu_type);
        }
    }
    labels
}

/// Per-class token counts. `None` is the outside class; it is counted under
/// `"O"` only when `include_outside` is set.
pub fn token_counts(gold: &[Option<AduType>], pred: &[Option<AduType>], include_outside: bool) -> Result<ClassCounts, TokenError> {
    if gold.len() != pred.len() {
        return Err(TokenError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let name = |t: Option<AduType>| match t {
        Some(t) => Some(t.as_str().to_string()),
        None if include_outside => Some("O".to_string()),
        None => None,
    };
    let mut counts = ClassCounts::new();
    for t in AduType::ALL {
        counts.insert(t.as_str().to_string(), Counts::default());
    }
    for (&g, &p) in gold.iter().zip(pred) {
        let (g, p) = (name(g), name(p));
        if g == p {
            if let Some(g) = g {
                counts.entry(g).or_default().tp += 1;
            }
            continue;
        }
        if let Some(p) = p {
            counts.entry(p).or_default().fp += 1;
        }
        if let Some(g) = g {
            counts.entry(g).or_default().fn_ += 1;
        }
    }
    Ok(counts)
}
