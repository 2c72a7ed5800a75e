use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TaggingError;
use crate::corpus::AduType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "BIO2")]
    Bio2,
    #[serde(rename = "BIOUL")]
    Bioul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Outside,
    Begin(AduType),
    Inside(AduType),
    Last(AduType),
    Unit(AduType),
}

impl Tag {
    pub fn adu_type(self) -> Option<AduType> {
        match self {
            Tag::Outside => None,
            Tag::Begin(t) | Tag::Inside(t) | Tag::Last(t) | Tag::Unit(t) => Some(t),
        }
    }

    /// Same span, BIO2 spelling.
    pub fn to_bio2(self) -> Tag {
        match self {
            Tag::Last(t) => Tag::Inside(t),
            Tag::Unit(t) => Tag::Begin(t),
            other => other,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (prefix, t) = match self {
            Tag::Outside => return f.write_str("O"),
            Tag::Begin(t) => ("B", t),
            Tag::Inside(t) => ("I", t),
            Tag::Last(t) => ("L", t),
            Tag::Unit(t) => ("U", t),
        };
        write!(f, "{prefix}-{t}")
    }
}

impl FromStr for Tag {
    type Err = TaggingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Tag::Outside);
        }
        let bad = || TaggingError::BadTag(s.to_string());
        let (prefix, class) = s.split_once('-').ok_or_else(bad)?;
        let t: AduType = class.parse().map_err(|_| bad())?;
        match prefix {
            "B" => Ok(Tag::Begin(t)),
            "I" => Ok(Tag::Inside(t)),
            "L" => Ok(Tag::Last(t)),
            "U" => Ok(Tag::Unit(t)),
            _ => Err(bad()),
        }
    }
}

impl Scheme {
    /// Label inventory; index 0 is `O`, then prefixes per class.
    pub fn labels(self) -> Vec<Tag> {
        let mut labels = vec![Tag::Outside];
        for t in AduType::ALL {
            labels.push(Tag::Begin(t));
            labels.push(Tag::Inside(t));
            if self == Scheme::Bioul {
                labels.push(Tag::Last(t));
                labels.push(Tag::Unit(t));
            }
        }
        labels
    }

    pub fn num_labels(self) -> usize {
        match self {
            Scheme::Bio2 => 7,
            Scheme::Bioul => 13,
        }
    }

    pub fn index(self, tag: Tag) -> Option<usize> {
        let class = |t: AduType| t.index();
        match (self, tag) {
            (_, Tag::Outside) => Some(0),
            (Scheme::Bio2, Tag::Begin(t)) => Some(1 + 2 * class(t)),
            (Scheme::Bio2, Tag::Inside(t)) => Some(2 + 2 * class(t)),
            (Scheme::Bio2, _) => None,
            (Scheme::Bioul, Tag::Begin(t)) => Some(1 + 4 * class(t)),
            (Scheme::Bioul, Tag::Inside(t)) => Some(2 + 4 * class(t)),
            (Scheme::Bioul, Tag::Last(t)) => Some(3 + 4 * class(t)),
            (Scheme::Bioul, Tag::Unit(t)) => Some(4 + 4 * class(t)),
        }
    }

    pub fn tag(self, index: usize) -> Tag {
        self.labels()[index]
    }

    /// Whether `to` may directly follow `from` in a well-formed sequence.
    pub fn allowed_transition(self, from: Tag, to: Tag) -> bool {
        match self {
            Scheme::Bio2 => match to {
                Tag::Inside(t) => matches!(from, Tag::Begin(f) | Tag::Inside(f) if f == t),
                Tag::Outside | Tag::Begin(_) => true,
                _ => false,
            },
            Scheme::Bioul => match from {
                Tag::Begin(f) | Tag::Inside(f) => matches!(to, Tag::Inside(t) | Tag::Last(t) if t == f),
                _ => matches!(to, Tag::Outside | Tag::Begin(_) | Tag::Unit(_)),
            },
        }
    }

    pub fn allowed_start(self, tag: Tag) -> bool {
        matches!(tag, Tag::Outside | Tag::Begin(_) | Tag::Unit(_))
            && (self == Scheme::Bioul || !matches!(tag, Tag::Unit(_)))
    }

    pub fn allowed_end(self, tag: Tag) -> bool {
        match self {
            Scheme::Bio2 => matches!(tag, Tag::Outside | Tag::Begin(_) | Tag::Inside(_)),
            Scheme::Bioul => matches!(tag, Tag::Outside | Tag::Last(_) | Tag::Unit(_)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSequence {
    pub scheme: Scheme,
    pub tags: Vec<Tag>,
}

impl TagSequence {
    pub fn to_bio2(&self) -> TagSequence {
        TagSequence {
            scheme: Scheme::Bio2,
            tags: self.tags.iter().map(|t| t.to_bio2()).collect(),
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        self.tags
            .iter()
            .map(|&t| self.scheme.index(t).expect("tag belongs to scheme"))
            .collect()
    }

    pub fn from_indices(scheme: Scheme, indices: &[usize]) -> Self {
        let labels = scheme.labels();
        Self {
            scheme,
            tags: indices.iter().map(|&i| labels[i]).collect(),
        }
    }

    /// Whether every transition obeys the scheme.
    pub fn is_valid(&self) -> bool {
        let s = self.scheme;
        match (self.tags.first(), self.tags.last()) {
            (None, _) => true,
            (Some(&first), Some(&last)) => {
                s.allowed_start(first)
                    && s.allowed_end(last)
                    && self.tags.windows(2).all(|w| s.allowed_transition(w[0], w[1]))
            }
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for TagSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tag) in self.tags.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{tag}")?;
        }
        Ok(())
    }
}
