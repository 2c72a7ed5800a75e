//! ADU recognition followed by relation extraction on the predicted units,
//! producing one argument graph per section.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adur::{AdurError, AdurModel};
use crate::are::{predict_relations, AreError, AreModel, SectionInput};
use crate::corpus::{AduSpan, SectionKey};
use crate::data::{Example, PreparedSection};
use crate::graph::ArgumentGraph;
use crate::tagging::{token_spans_to_adus, TokenSpan};

pub const PREDICTED_ID_PREFIX: &str = "T";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Adur(#[from] AdurError),
    #[error(transparent)]
    Are(#[from] AreError),
    #[error("gold unit {0} missing from the section")]
    MissingGoldUnit(String),
}

/// Where the units handed to relation extraction come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitSource {
    #[default]
    Predicted,
    Gold,
}

/// Units of a section as token spans, their fragments and ids.
fn units(adur: &AdurModel, ex: &Example<'_>, source: UnitSource) -> Result<(Vec<TokenSpan>, Vec<AduSpan>), PipelineError> {
    match source {
        UnitSource::Predicted => {
            let spans = adur.predict_token_spans(ex.features)?;
            let frags = token_spans_to_adus(&spans, &ex.section.tokens, PREDICTED_ID_PREFIX);
            Ok((spans, frags))
        }
        UnitSource::Gold => {
            let mut frags = Vec::with_capacity(ex.section.token_adus.len());
            for a in &ex.section.token_adus {
                let frag = ex
                    .section
                    .adus
                    .iter()
                    .find(|g| g.id == a.id)
                    .ok_or_else(|| PipelineError::MissingGoldUnit(a.id.clone()))?;
                frags.push(frag.clone());
            }
            Ok((ex.section.token_spans(), frags))
        }
    }
}

/// Predicts units (or takes the gold ones), classifies candidate pairs and
/// merges fragments joined by predicted `parts_of_same`.
pub fn run_pipeline(adur: &AdurModel, are: &AreModel, ex: &Example<'_>, source: UnitSource) -> Result<ArgumentGraph, PipelineError> {
    if ex.features.nrows() != ex.section.len() {
        return Err(AdurError::FeatureRows {
            section: ex.section.key.to_string(),
            rows: ex.features.nrows(),
            tokens: ex.section.len(),
        }
        .into());
    }
    let (spans, frags) = units(adur, ex, source)?;
    let ids: Vec<String> = frags.iter().map(|f| f.id.clone()).collect();
    let input = SectionInput::new(ex.features, spans);
    let relations = predict_relations(are, &input, &ids)?;
    Ok(ArgumentGraph::from_fragments(ex.section.key.clone(), &frags, &relations))
}

/// The annotated graph of a prepared section.
pub fn gold_graph(section: &PreparedSection) -> ArgumentGraph {
    ArgumentGraph::from_fragments(section.key.clone(), &section.adus, &section.relations)
}

/// One line of pipeline output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionResult {
    pub key: SectionKey,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<ArgumentGraph>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs every section, in parallel, keeping input order. A failing section
/// yields an error entry instead of aborting the run.
pub fn run_corpus(adur: &AdurModel, are: &AreModel, examples: &[Example<'_>], source: UnitSource) -> Vec<SectionResult> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(examples.len().max(1));
    let chunk = examples.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = examples
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|ex| match run_pipeline(adur, are, ex, source) {
                            Ok(graph) => SectionResult {
                                key: ex.section.key.clone(),
                                graph: Some(graph),
                                error: None,
                            },
                            Err(e) => {
                                log::error!("{}: {e}", ex.section.key);
                                SectionResult {
                                    key: ex.section.key.clone(),
                                    graph: None,
                                    error: Some(e.to_string()),
                                }
                            }
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("pipeline worker panicked")).collect()
    })
}

pub fn write_results_jsonl<W: Write>(results: &[SectionResult], mut out: W) -> std::io::Result<()> {
    for r in results {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_results_jsonl(text: &str) -> Result<Vec<SectionResult>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
