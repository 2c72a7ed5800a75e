//! Corpus file readers.
//!
//! Two on-disk layouts are accepted, both carrying character offsets into the
//! raw file text (header included):
//!
//! * GATE XML (`*.xml`): `<TextWithNodes>` holds the text, `<AnnotationSet>`
//!   holds `Annotation` elements whose `Type` is an ADU class and whose
//!   `StartNode`/`EndNode` are character offsets, and `<RelationSet>` holds
//!   `Relation` elements with `Members="head;tail"` naming annotation ids.
//! * brat standoff (`*.txt` + `*.ann`): `T` lines for ADUs and `R` lines
//!   (`label Arg1:head Arg2:tail`) for relations.

use std::collections::HashSet;
use std::path::Path;

use super::model::{char_slice, AduSpan, AduType, Relation, RelationLabel};
use super::CorpusError;

/// Annotations of one file before any preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDocument {
    pub id: String,
    pub raw_text: String,
    pub adus: Vec<AduSpan>,
    pub relations: Vec<Relation>,
}

pub fn read_gate_xml(id: &str, xml: &str) -> Result<RawDocument, CorpusError> {
    let malformed = |message: String| CorpusError::Malformed {
        doc_id: id.to_string(),
        message,
    };
    let doc = roxmltree::Document::parse(xml).map_err(|e| malformed(e.to_string()))?;
    let root = doc.root_element();
    let text_node = root
        .descendants()
        .find(|n| n.has_tag_name("TextWithNodes"))
        .ok_or_else(|| malformed("missing <TextWithNodes>".into()))?;
    let raw_text: String = text_node
        .children()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect();

    let mut adus = Vec::new();
    let mut relations = Vec::new();
    for ann in root.descendants().filter(|n| n.has_tag_name("Annotation")) {
        let attr = |name: &str| {
            ann.attribute(name)
                .ok_or_else(|| malformed(format!("<Annotation> without {name}")))
        };
        let ty = attr("Type")?;
        let Ok(adu_type) = ty.parse::<AduType>() else {
            log::debug!("{id}: skipping annotation of type {ty}");
            continue;
        };
        let parse = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| malformed(format!("bad node offset `{v}`")))
        };
        adus.push(AduSpan::new(
            attr("Id")?,
            adu_type,
            parse(attr("StartNode")?)?,
            parse(attr("EndNode")?)?,
        ));
    }
    for rel in root.descendants().filter(|n| n.has_tag_name("Relation")) {
        let ty = rel
            .attribute("Type")
            .ok_or_else(|| malformed("<Relation> without Type".into()))?;
        let label = ty.parse::<RelationLabel>().map_err(malformed)?;
        let members = rel
            .attribute("Members")
            .ok_or_else(|| malformed("<Relation> without Members".into()))?;
        let parts: Vec<&str> = members.split(';').map(str::trim).collect();
        let [head, tail] = parts.as_slice() else {
            return Err(malformed(format!("relation members `{members}` are not a pair")));
        };
        relations.push(Relation::new(*head, *tail, label));
    }
    let doc = RawDocument {
        id: id.to_string(),
        raw_text,
        adus,
        relations,
    };
    validate_raw(&doc)?;
    Ok(doc)
}

pub fn read_brat(id: &str, txt: &str, ann: &str) -> Result<RawDocument, CorpusError> {
    let malformed = |line_no: usize, message: String| CorpusError::Malformed {
        doc_id: id.to_string(),
        message: format!("line {}: {message}", line_no + 1),
    };
    let mut adus = Vec::new();
    let mut relations = Vec::new();
    for (no, line) in ann.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let ann_id = fields[0];
        let body = fields.get(1).ok_or_else(|| malformed(no, "missing body".into()))?;
        if ann_id.starts_with('T') {
            let mut it = body.split_whitespace();
            let ty = it.next().unwrap_or_default();
            let adu_type = ty.parse::<AduType>().map_err(|e| malformed(no, e))?;
            let rest: Vec<&str> = it.collect();
            let offsets = rest.join(" ");
            if offsets.contains(';') {
                return Err(malformed(no, "discontinuous text-bound annotation".into()));
            }
            let (start, end) = match rest.as_slice() {
                [s, e] => (
                    s.parse::<usize>().map_err(|_| malformed(no, format!("bad offset `{s}`")))?,
                    e.parse::<usize>().map_err(|_| malformed(no, format!("bad offset `{e}`")))?,
                ),
                _ => return Err(malformed(no, format!("bad offsets `{offsets}`"))),
            };
            if let Some(surface) = fields.get(2) {
                if start <= end && end <= txt.chars().count() && char_slice(txt, start, end) != *surface {
                    return Err(malformed(no, "covered text does not match offsets".into()));
                }
            }
            adus.push(AduSpan::new(ann_id, adu_type, start, end));
        } else if ann_id.starts_with('R') {
            let parts: Vec<&str> = body.split_whitespace().collect();
            let [label, arg1, arg2] = parts.as_slice() else {
                return Err(malformed(no, format!("bad relation `{body}`")));
            };
            let label = label.parse::<RelationLabel>().map_err(|e| malformed(no, e))?;
            let head = arg1
                .strip_prefix("Arg1:")
                .ok_or_else(|| malformed(no, "expected Arg1:".into()))?;
            let tail = arg2
                .strip_prefix("Arg2:")
                .ok_or_else(|| malformed(no, "expected Arg2:".into()))?;
            relations.push(Relation::new(head, tail, label));
        } else {
            log::debug!("{id}: ignoring annotation line {ann_id}");
        }
    }
    let doc = RawDocument {
        id: id.to_string(),
        raw_text: txt.to_string(),
        adus,
        relations,
    };
    validate_raw(&doc)?;
    Ok(doc)
}

fn validate_raw(doc: &RawDocument) -> Result<(), CorpusError> {
    let len = doc.raw_text.chars().count();
    let mut ids = HashSet::new();
    for adu in &doc.adus {
        if adu.start >= adu.end || adu.end > len {
            return Err(CorpusError::OffsetOutOfBounds {
                doc_id: doc.id.clone(),
                adu_id: adu.id.clone(),
                start: adu.start,
                end: adu.end,
                len,
            });
        }
        if !ids.insert(adu.id.as_str()) {
            return Err(CorpusError::Malformed {
                doc_id: doc.id.clone(),
                message: format!("duplicate annotation id {}", adu.id),
            });
        }
    }
    for rel in &doc.relations {
        for end in [&rel.head, &rel.tail] {
            if !ids.contains(end.as_str()) {
                return Err(CorpusError::UnknownAdu {
                    doc_id: doc.id.clone(),
                    adu_id: end.clone(),
                });
            }
        }
        if rel.head == rel.tail {
            return Err(CorpusError::Malformed {
                doc_id: doc.id.clone(),
                message: format!("self relation on {}", rel.head),
            });
        }
    }
    Ok(())
}

/// Serializes a raw document as GATE XML readable by [`read_gate_xml`].
pub fn write_gate_xml(doc: &RawDocument) -> String {
    let mut out = String::from("<?xml version='1.0' encoding='UTF-8'?>\n<GateDocument version=\"3\">\n");
    out.push_str("<TextWithNodes>");
    out.push_str(&xml_escape(&doc.raw_text));
    out.push_str("</TextWithNodes>\n<AnnotationSet Name=\"Original markups\">\n");
    for adu in &doc.adus {
        out.push_str(&format!(
            "<Annotation Id=\"{}\" Type=\"{}\" StartNode=\"{}\" EndNode=\"{}\"/>\n",
            xml_escape(&adu.id),
            adu.adu_type,
            adu.start,
            adu.end
        ));
    }
    out.push_str("</AnnotationSet>\n<RelationSet Name=\"Original markups\">\n");
    for (i, rel) in doc.relations.iter().enumerate() {
        out.push_str(&format!(
            "<Relation Id=\"r{}\" Type=\"{}\" Members=\"{};{}\"/>\n",
            i + 1,
            rel.label,
            xml_escape(&rel.head),
            xml_escape(&rel.tail)
        ));
    }
    out.push_str("</RelationSet>\n</GateDocument>\n");
    out
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Reads one corpus file by path; `.xml` as GATE XML, `.txt` with a sibling `.ann` as brat.
pub fn read_file(path: &Path) -> Result<RawDocument, CorpusError> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| CorpusError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    match path.extension().and_then(|e| e.to_str()) {
        Some("xml") => read_gate_xml(&id, &read(path)?),
        Some("txt") => {
            let ann = path.with_extension("ann");
            read_brat(&id, &read(path)?, &read(&ann)?)
        }
        _ => Err(CorpusError::Malformed {
            doc_id: id,
            message: "unsupported file extension".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const XML: &str = r#"<?xml version='1.0' encoding='UTF-8'?>
<GateDocument version="3">
<TextWithNodes>&lt;?xml version="1.0"?&gt;&lt;Document xmlns:gate="http://www.gate.ac.uk"&gt;<Node id="66"/>&lt;H1&gt;We claim X because Y.</TextWithNodes>
<AnnotationSet Name="Original markups">
<Annotation Id="1" Type="own_claim" StartNode="73" EndNode="80"/>
<Annotation Id="2" Type="data" StartNode="89" EndNode="90"/>
<Annotation Id="9" Type="Sentence" StartNode="66" EndNode="91"/>
</AnnotationSet>
<RelationSet Name="Original markups">
<Relation Id="3" Type="supports" Members="2;1"/>
</RelationSet>
</GateDocument>"#;

    #[test]
    fn gate_xml() {
        let doc = read_gate_xml("A01", XML).unwrap();
        assert!(doc.raw_text.starts_with("<?xml"));
        assert_eq!(doc.adus.len(), 2);
        assert_eq!(char_slice(&doc.raw_text, 73, 80), "claim X");
        assert_eq!(doc.relations, vec![Relation::new("2", "1", RelationLabel::Supports)]);
    }

    #[test]
    fn gate_round_trip() {
        let doc = read_gate_xml("A01", XML).unwrap();
        let again = read_gate_xml("A01", &write_gate_xml(&doc)).unwrap();
        assert_eq!(doc, again);
    }

    #[test]
    fn malformed_xml_names_file() {
        let err = read_gate_xml("A07", "<GateDocument><TextWithNodes>").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { ref doc_id, .. } if doc_id == "A07"));
    }

    #[test]
    fn offset_out_of_bounds() {
        let xml = XML.replace("EndNode=\"90\"", "EndNode=\"500\"");
        let err = read_gate_xml("A01", &xml).unwrap_err();
        assert!(matches!(err, CorpusError::OffsetOutOfBounds { .. }));
    }

    #[test]
    fn brat_pair() {
        let txt = "We claim X because Y.";
        let ann = "T1\town_claim 3 10\tclaim X\nT2\tdata 19 20\tY\nR1\tsupports Arg1:T2 Arg2:T1\t\n";
        let doc = read_brat("A02", txt, ann).unwrap();
        assert_eq!(doc.adus[1], AduSpan::new("T2", AduType::Data, 19, 20));
        assert_eq!(doc.relations[0].head, "T2");
    }

    #[test]
    fn brat_surface_mismatch() {
        let err = read_brat("A02", "abc", "T1\tdata 0 2\txx\n").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { .. }));
    }

    #[test]
    fn unknown_relation_endpoint() {
        let err = read_brat("A02", "abc", "T1\tdata 0 2\tab\nR1\tsupports Arg1:T1 Arg2:T9\n").unwrap_err();
        assert!(matches!(err, CorpusError::UnknownAdu { .. }));
    }
}
