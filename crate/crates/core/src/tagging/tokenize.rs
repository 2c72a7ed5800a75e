use serde::{Deserialize, Serialize};

use crate::corpus::{Section, SectionKey};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Character offsets into the section text, end exclusive.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedSection {
    pub key: SectionKey,
    pub tokens: Vec<Token>,
}

impl TokenizedSection {
    pub fn new(section: &Section) -> Self {
        Self {
            key: section.key(),
            tokens: tokenize(&section.text),
        }
    }

    pub fn texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }
}

/// Runs of alphanumeric characters form one token; every other
/// non-whitespace character is a token of its own.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word: Option<(usize, String)> = None;
    let mut idx = 0;
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.get_or_insert_with(|| (idx, String::new())).1.push(c);
        } else {
            if let Some((start, w)) = word.take() {
                tokens.push(Token { text: w, start, end: idx });
            }
            if !c.is_whitespace() {
                tokens.push(Token {
                    text: c.to_string(),
                    start: idx,
                    end: idx + 1,
                });
            }
        }
        idx += 1;
    }
    if let Some((start, w)) = word {
        tokens.push(Token { text: w, start, end: idx });
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::char_slice;

    #[test]
    fn punctuation_split() {
        let toks = tokenize("a, b");
        let got: Vec<(&str, usize, usize)> = toks.iter().map(|t| (t.text.as_str(), t.start, t.end)).collect();
        assert_eq!(got, vec![("a", 0, 1), (",", 1, 2), ("b", 3, 4)]);
    }

    #[test]
    fn whitespace_only() {
        assert!(tokenize("  \n\t ").is_empty());
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn offsets_slice_back() {
        let text = "<H1>Résumé</H1> The wrinkling coefficients (see Sec. 3.3) are done per-triangle.";
        let toks = tokenize(text);
        for t in &toks {
            assert_eq!(char_slice(text, t.start, t.end), t.text);
        }
        assert!(toks.windows(2).all(|w| w[0].end <= w[1].start));
        assert_eq!(toks[1].text, "H1");
        assert_eq!(toks[3].text, "Résumé");
    }
}
