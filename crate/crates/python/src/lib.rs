use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use sam_core::adur::AdurModel;
use sam_core::are::AreModel;
use sam_core::corpus::{parse_corpus, read_sections_jsonl, AduType, Section};
use sam_core::data::{embed_section, prepare_documents, Example, PreparedSection};
use sam_core::embed::{hash_embed, EmbeddingSource, EmbeddingSpec};
use sam_core::eval::{evaluate as evaluate_graphs, Denominator, MatchMode, SectionEval};
use sam_core::graph::ArgumentGraph;
use sam_core::nn::checkpoint::Checkpoint;
use sam_core::pipeline::{gold_graph, read_results_jsonl, run_pipeline, UnitSource};
use sam_core::tagging::{decode_token_spans, encode_token_spans, tokenize as tokenize_text, Scheme, Tag, TokenSpan};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_scheme(scheme: &str) -> PyResult<Scheme> {
    serde_json::from_value(serde_json::Value::String(scheme.to_uppercase())).map_err(|_| value_err(format!("unknown scheme `{scheme}`")))
}

fn parse_mode(mode: &str, denominator: &str) -> PyResult<MatchMode> {
    let denominator = match denominator {
        "shorter" => Denominator::Shorter,
        "longer" => Denominator::Longer,
        other => return Err(value_err(format!("unknown denominator `{other}`"))),
    };
    match mode {
        "exact" => Ok(MatchMode::Exact),
        "weak" => Ok(MatchMode::Weak { denominator }),
        other => Err(value_err(format!("unknown mode `{other}`"))),
    }
}

/// Tokens of a section text as `(text, start, end)` with character offsets.
#[pyfunction]
fn tokenize(text: &str) -> Vec<(String, usize, usize)> {
    tokenize_text(text).into_iter().map(|t| (t.text, t.start, t.end)).collect()
}

/// Tags for `n_tokens` tokens given `(start, end, type)` token spans.
#[pyfunction]
#[pyo3(signature = (n_tokens, spans, scheme = "BIOUL"))]
fn encode_tags(n_tokens: usize, spans: Vec<(usize, usize, String)>, scheme: &str) -> PyResult<Vec<String>> {
    let scheme = parse_scheme(scheme)?;
    let mut parsed = Vec::with_capacity(spans.len());
    for (start, end, t) in spans {
        if start >= end || end > n_tokens {
            return Err(value_err(format!("span [{start}, {end}) outside {n_tokens} tokens")));
        }
        parsed.push(TokenSpan::new(start, end, t.parse::<AduType>().map_err(value_err)?));
    }
    parsed.sort_by_key(|s| s.start);
    if parsed.windows(2).any(|w| w[0].end > w[1].start) {
        return Err(value_err("spans overlap"));
    }
    Ok(encode_token_spans(n_tokens, &parsed, scheme).tags.iter().map(Tag::to_string).collect())
}

/// Spans `(start, end, type)` of a tag sequence; ill-formed sequences are repaired.
#[pyfunction]
fn decode_tags(tags: Vec<String>) -> PyResult<Vec<(usize, usize, String)>> {
    let tags: Vec<Tag> = tags.iter().map(|t| t.parse()).collect::<Result<_, _>>().map_err(value_err)?;
    Ok(decode_token_spans(&tags).into_iter().map(|s| (s.start, s.end, s.adu_type.to_string())).collect())
}

/// Unit-norm hash embeddings, one row per token.
#[pyfunction]
fn hash_embeddings(tokens: Vec<String>, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    hash_embed(&tokens, dim, seed).rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Parses a corpus directory into section JSON strings.
#[pyfunction]
fn load_corpus(path: PathBuf) -> PyResult<Vec<String>> {
    let docs = parse_corpus(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(docs
        .iter()
        .flat_map(|d| &d.sections)
        .map(|s| serde_json::to_string(s).expect("sections serialize"))
        .collect())
}

fn parse_sections(jsonl: &str) -> PyResult<Vec<PreparedSection>> {
    let docs = read_sections_jsonl(jsonl.as_bytes()).map_err(value_err)?;
    Ok(prepare_documents(&docs))
}

/// Scores predicted graphs (JSON-lines from `predict`) against gold sections
/// (JSON-lines from `prepare`); returns the full report as JSON.
#[pyfunction]
#[pyo3(signature = (gold, pred, mode = "exact", denominator = "shorter"))]
fn evaluate(gold: &str, pred: &str, mode: &str, denominator: &str) -> PyResult<String> {
    let mode = parse_mode(mode, denominator)?;
    let sections = parse_sections(gold)?;
    let results = read_results_jsonl(pred).map_err(value_err)?;
    let mut pairs = Vec::with_capacity(sections.len());
    for s in &sections {
        let pred = results
            .iter()
            .find(|r| r.key == s.key)
            .ok_or_else(|| value_err(format!("no prediction for section {}", s.key)))?;
        let graph = pred.graph.clone().unwrap_or_else(|| ArgumentGraph::empty(s.key.clone()));
        pairs.push((gold_graph(s), graph));
    }
    let evals: Vec<SectionEval<'_>> = sections
        .iter()
        .zip(&pairs)
        .map(|(s, (gold, pred))| SectionEval {
            gold,
            pred,
            tokens: &s.tokens,
        })
        .collect();
    let report = evaluate_graphs(&evals, mode).map_err(value_err)?;
    Ok(serde_json::to_string(&report).expect("reports serialize"))
}

/// Trained tagger and relation classifier with their embedding source.
#[pyclass(frozen)]
struct Pipeline {
    adur: AdurModel,
    are: AreModel,
    embed: Box<dyn EmbeddingSource>,
}

fn load_checkpoint(path: &Path) -> PyResult<Checkpoint> {
    Checkpoint::load(path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))
}

#[pymethods]
impl Pipeline {
    #[new]
    #[pyo3(signature = (adur, are, embed = "hash:64:0"))]
    fn new(adur: PathBuf, are: PathBuf, embed: &str) -> PyResult<Self> {
        let adur_model = AdurModel::from_checkpoint(&load_checkpoint(&adur)?).map_err(value_err)?;
        let are_model = AreModel::from_checkpoint(&load_checkpoint(&are)?).map_err(value_err)?;
        let spec: EmbeddingSpec = embed.parse().map_err(value_err)?;
        let source = spec.open().map_err(value_err)?;
        if source.dim() != adur_model.embed_dim || source.dim() != are_model.embed_dim {
            return Err(value_err(format!(
                "{spec} gives {}-dim embeddings, checkpoints expect {} and {}",
                source.dim(),
                adur_model.embed_dim,
                are_model.embed_dim
            )));
        }
        Ok(Self {
            adur: adur_model,
            are: are_model,
            embed: source,
        })
    }

    /// Argument graph JSON of one section JSON.
    #[pyo3(signature = (section, gold_adus = false))]
    fn predict(&self, section: &str, gold_adus: bool) -> PyResult<String> {
        let section: Section = serde_json::from_str(section).map_err(value_err)?;
        let prepared = PreparedSection::new(&section);
        let features = embed_section(self.embed.as_ref(), &prepared).map_err(value_err)?;
        let source = if gold_adus { UnitSource::Gold } else { UnitSource::Predicted };
        let ex = Example {
            section: &prepared,
            features: &features,
        };
        let graph = run_pipeline(&self.adur, &self.are, &ex, source).map_err(value_err)?;
        Ok(serde_json::to_string(&graph).expect("graphs serialize"))
    }
}

#[pymodule]
fn sam_rs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(encode_tags, m)?)?;
    m.add_function(wrap_pyfunction!(decode_tags, m)?)?;
    m.add_function(wrap_pyfunction!(hash_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(load_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<Pipeline>()?;
    Ok(())
}
