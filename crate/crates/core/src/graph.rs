use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{merge_parts_of_same, AduSpan, MergedAdu, Relation, RelationLabel, SectionKey};

/// Argument structure of one section after `parts_of_same` merging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentGraph {
    pub key: SectionKey,
    pub adus: Vec<MergedAdu>,
    /// `supports` and `contradicts` over merged ids. Symmetric relations are
    /// stored once with the smaller id as head.
    pub relations: Vec<Relation>,
    /// The `parts_of_same` links that were merged, over fragment ids.
    pub parts_of_same: Vec<Relation>,
}

/// Orders a symmetric relation's endpoints so that equal relations compare equal.
pub fn canonical(rel: &Relation) -> Relation {
    if rel.label.is_symmetric() && rel.tail < rel.head {
        Relation::new(rel.tail.clone(), rel.head.clone(), rel.label)
    } else {
        rel.clone()
    }
}

impl ArgumentGraph {
    pub fn empty(key: SectionKey) -> Self {
        Self {
            key,
            adus: Vec::new(),
            relations: Vec::new(),
            parts_of_same: Vec::new(),
        }
    }

    /// Builds the graph from fragments and relations over fragment ids.
    /// Relations with unknown endpoints and `semantically_same` are ignored.
    pub fn from_fragments(key: SectionKey, fragments: &[AduSpan], relations: &[Relation]) -> Self {
        let known: BTreeSet<&str> = fragments.iter().map(|a| a.id.as_str()).collect();
        let usable: Vec<Relation> = relations
            .iter()
            .filter(|r| r.label != RelationLabel::SemanticallySame)
            .filter(|r| known.contains(r.head.as_str()) && known.contains(r.tail.as_str()) && r.head != r.tail)
            .cloned()
            .collect();
        let parts_of_same: BTreeSet<Relation> = usable
            .iter()
            .filter(|r| r.label == RelationLabel::PartsOfSame)
            .map(canonical)
            .collect();
        let (adus, merged) = merge_parts_of_same(fragments, &usable);
        let relations: BTreeSet<Relation> = merged.iter().map(canonical).collect();
        Self {
            key,
            adus,
            relations: relations.into_iter().collect(),
            parts_of_same: parts_of_same.into_iter().collect(),
        }
    }

    pub fn fragments(&self) -> impl Iterator<Item = &AduSpan> {
        self.adus.iter().flat_map(|a| &a.fragments)
    }

    pub fn adu(&self, id: &str) -> Option<&MergedAdu> {
        self.adus.iter().find(|a| a.id == id)
    }
}
