use std::sync::LazyLock;

use regex::Regex;

/// Leading XML declaration plus the GATE `Document` open tag, and any text up
/// to the next tag.
static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"^<\?xml[^>]*>[^<]*<Document xmlns:gate="http://www.gate.ac.uk"[^>]*>[^<]*"#)
        .expect("header pattern")
});

static SECTION_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)<h1>").expect("section pattern"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrippedText {
    pub text: String,
    /// Number of characters removed from the front.
    pub removed_chars: usize,
    /// `false` when the header pattern did not match and the input was returned unchanged.
    pub matched: bool,
}

/// Removes the file header. Idempotent: stripped text no longer matches.
pub fn strip_header(raw: &str) -> StrippedText {
    match HEADER.find(raw) {
        Some(m) => StrippedText {
            text: raw[m.end()..].to_string(),
            removed_chars: raw[..m.end()].chars().count(),
            matched: true,
        },
        None => {
            log::warn!("no GATE header found; text left unchanged");
            StrippedText {
                text: raw.to_string(),
                removed_chars: 0,
                matched: false,
            }
        }
    }
}

/// Character ranges of the sections of a header-stripped document.
///
/// A new section starts at every `<H1>` (any case); the marker stays in the
/// section it opens. An empty preamble before the first marker is dropped.
pub fn split_sections(doc_text: &str) -> Vec<(usize, usize)> {
    let total = doc_text.chars().count();
    let mut starts: Vec<usize> = Vec::new();
    let mut chars_seen = 0;
    let mut last_byte = 0;
    for m in SECTION_MARKER.find_iter(doc_text) {
        chars_seen += doc_text[last_byte..m.start()].chars().count();
        last_byte = m.start();
        starts.push(chars_seen);
    }
    if starts.first() != Some(&0) {
        starts.insert(0, 0);
    }
    let mut ranges: Vec<(usize, usize)> = starts
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, starts.get(i + 1).copied().unwrap_or(total)))
        .collect();
    if total == 0 {
        ranges.clear();
        ranges.push((0, 0));
    }
    ranges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_gate_header() {
        let raw = "<?xml version=\"1.0\"?> <Document xmlns:gate=\"http://www.gate.ac.uk\" \
                   name=\"A01\">\n<Title>Body</Title>";
        let out = strip_header(raw);
        assert!(out.matched);
        assert_eq!(out.text, "<Title>Body</Title>");
        assert_eq!(out.removed_chars, raw.len() - out.text.len());
    }

    #[test]
    fn multiline_header() {
        let raw = "<?xml version='1.0'\n encoding='UTF-8'?>\n\n<Document xmlns:gate=\"http://www.gate.ac.uk\"\n  \
                   gate:gateId=\"1\"\n  name=\"x\">\n  \n<H1>Intro</H1>";
        assert_eq!(strip_header(raw).text, "<H1>Intro</H1>");
    }

    #[test]
    fn no_header_is_unchanged_and_idempotent() {
        let out = strip_header("BODY");
        assert!(!out.matched);
        assert_eq!(out.text, "BODY");
        let raw = "<?xml version=\"1.0\"?><Document xmlns:gate=\"http://www.gate.ac.uk\">x<b>";
        let once = strip_header(raw).text;
        assert_eq!(once, "<b>");
        assert_eq!(strip_header(&once).text, once);
    }

    #[test]
    fn header_only_matches_at_start() {
        let raw = "lead <?xml version=\"1.0\"?><Document xmlns:gate=\"http://www.gate.ac.uk\">x";
        assert!(!strip_header(raw).matched);
    }

    #[test]
    fn sections_at_markers() {
        let text = "intro<H1>Methods</H1>m-body<H1>Results</H1>r-body";
        let ranges = split_sections(text);
        assert_eq!(ranges, vec![(0, 5), (5, 27), (27, 49)]);
        assert_eq!(&text[5..9], "<H1>");
    }

    #[test]
    fn no_marker_single_section() {
        assert_eq!(split_sections("plain text"), vec![(0, 10)]);
    }

    #[test]
    fn empty_preamble_dropped() {
        assert_eq!(split_sections("<H1>A</H1>x"), vec![(0, 11)]);
    }

    #[test]
    fn case_insensitive_and_char_offsets() {
        let text = "é<h1>a<H1>b";
        assert_eq!(split_sections(text), vec![(0, 1), (1, 6), (6, 11)]);
    }

    #[test]
    fn partition_reconstructs_text() {
        let text = "x<H1>y</H1>z<h1>w";
        let joined: String = split_sections(text)
            .iter()
            .map(|&(s, e)| crate::corpus::char_slice(text, s, e))
            .collect();
        assert_eq!(joined, text);
    }
}
