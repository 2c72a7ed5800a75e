use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::model::{AduSpan, MergedAdu, Relation, RelationLabel};

/// Collapses components connected by `parts_of_same` (read as undirected)
/// into single units and rewrites all other relations onto the component
/// representatives. Output order is independent of input order.
pub fn merge_parts_of_same(adus: &[AduSpan], relations: &[Relation]) -> (Vec<MergedAdu>, Vec<Relation>) {
    let index: HashMap<&str, usize> = adus.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
    let mut parent: Vec<usize> = (0..adus.len()).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for rel in relations.iter().filter(|r| r.label == RelationLabel::PartsOfSame) {
        let (Some(&a), Some(&b)) = (index.get(rel.head.as_str()), index.get(rel.tail.as_str())) else {
            log::warn!("parts_of_same references unknown ADU ({} -> {})", rel.head, rel.tail);
            continue;
        };
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }

    let mut groups: BTreeMap<usize, Vec<&AduSpan>> = BTreeMap::new();
    for (i, adu) in adus.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(adu);
    }

    let mut merged: Vec<MergedAdu> = groups
        .into_values()
        .map(|mut frags| {
            frags.sort_by(|a, b| (a.start, a.end, &a.id).cmp(&(b.start, b.end, &b.id)));
            let rep = frags[0];
            if frags.iter().any(|f| f.adu_type != rep.adu_type) {
                log::warn!("parts_of_same joins different ADU types; using {} from {}", rep.adu_type, rep.id);
            }
            MergedAdu {
                id: rep.id.clone(),
                adu_type: rep.adu_type,
                fragments: frags.into_iter().cloned().collect(),
            }
        })
        .collect();
    merged.sort_by(|a, b| (a.start(), a.end(), &a.id).cmp(&(b.start(), b.end(), &b.id)));

    let representative: HashMap<&str, &str> = merged
        .iter()
        .flat_map(|m| m.fragments.iter().map(move |f| (f.id.as_str(), m.id.as_str())))
        .collect();
    let rewritten: BTreeSet<Relation> = relations
        .iter()
        .filter(|r| r.label != RelationLabel::PartsOfSame)
        .filter_map(|r| {
            let head = representative.get(r.head.as_str())?;
            let tail = representative.get(r.tail.as_str())?;
            if head == tail {
                log::warn!("relation {} -> {} collapses onto one merged unit", r.head, r.tail);
                return None;
            }
            Some(Relation::new(*head, *tail, r.label))
        })
        .collect();
    (merged, rewritten.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AduType;

    fn adu(id: &str, start: usize) -> AduSpan {
        AduSpan::new(id, AduType::OwnClaim, start, start + 2)
    }

    fn pos(a: &str, b: &str) -> Relation {
        Relation::new(a, b, RelationLabel::PartsOfSame)
    }

    fn ids(merged: &[MergedAdu]) -> Vec<Vec<&str>> {
        merged
            .iter()
            .map(|m| m.fragments.iter().map(|f| f.id.as_str()).collect())
            .collect()
    }

    #[test]
    fn single_edge() {
        let adus = [adu("A", 0), adu("B", 5), adu("C", 10)];
        let (merged, rels) = merge_parts_of_same(&adus, &[pos("A", "B")]);
        assert_eq!(ids(&merged), vec![vec!["A", "B"], vec!["C"]]);
        assert!(rels.is_empty());
    }

    #[test]
    fn chain_is_one_component() {
        let adus = [adu("A", 0), adu("B", 5), adu("C", 10)];
        let (merged, _) = merge_parts_of_same(&adus, &[pos("B", "C"), pos("A", "B")]);
        assert_eq!(ids(&merged), vec![vec!["A", "B", "C"]]);
    }

    #[test]
    fn rewrites_and_dedups() {
        let adus = [adu("A", 0), adu("B", 5), adu("X", 10)];
        let rels = [
            Relation::new("A", "X", RelationLabel::Supports),
            Relation::new("B", "X", RelationLabel::Supports),
            pos("A", "B"),
        ];
        let (merged, rels) = merge_parts_of_same(&adus, &rels);
        assert_eq!(merged[0].id, "A");
        assert_eq!(rels, vec![Relation::new("A", "X", RelationLabel::Supports)]);
    }

    #[test]
    fn type_conflict_uses_first_fragment() {
        let adus = [
            AduSpan::new("B", AduType::Data, 5, 7),
            AduSpan::new("A", AduType::BackgroundClaim, 0, 2),
        ];
        let (merged, _) = merge_parts_of_same(&adus, &[pos("B", "A")]);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].adu_type, AduType::BackgroundClaim);
    }

    #[test]
    fn idempotent() {
        let adus = [adu("A", 0), adu("B", 5), adu("C", 10), adu("D", 15)];
        let rels = [pos("A", "C"), Relation::new("B", "C", RelationLabel::Contradicts)];
        let (merged, rewritten) = merge_parts_of_same(&adus, &rels);
        let reps: Vec<AduSpan> = merged.iter().map(|m| m.fragments[0].clone()).collect();
        let (again, rewritten_again) = merge_parts_of_same(&reps, &rewritten);
        assert_eq!(ids(&again), merged.iter().map(|m| vec![m.id.as_str()]).collect::<Vec<_>>());
        assert_eq!(rewritten, rewritten_again);
    }
}
