mod exit;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use sam_core::adur::{cross_validate_adur, train_adur, AdurError, AdurModel};
use sam_core::are::{candidate_records, cross_validate_are, train_are, AreError, AreModel};
use sam_core::config::{apply_overrides, parse_override, read_config_file, AdurConfig, AreConfig};
use sam_core::corpus::{label_stats, make_split, parse_corpus, read_sections_jsonl, verify_table1, write_sections_jsonl, CorpusError, Document};
use sam_core::data::{embed_all, examples, prepare_documents, PreparedSection};
use sam_core::embed::{EmbedError, EmbeddingSource, EmbeddingSpec};
use sam_core::eval::{bootstrap_compare, error_feature_report, evaluate, Denominator, ErrorFeatureReport, FullReport, MatchMode, SectionEval};
use sam_core::graph::ArgumentGraph;
use sam_core::nn::checkpoint::Checkpoint;
use sam_core::pipeline::{gold_graph, read_results_jsonl, run_corpus, write_results_jsonl, UnitSource};
use sam_core::synthetic::{generate, write_corpus, SyntheticSpec};
use sam_core::train::{CvResult, Trained};

use exit::{Code, CliResult, Failure};

#[derive(Parser)]
#[command(name = "sam", version, about = "Argument mining for scientific text: unit tagging, relation extraction, evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic GATE XML corpus
    Synth(SynthArgs),
    /// Parse a corpus into section JSON-lines plus label statistics
    Prepare(PrepareArgs),
    /// Train the unit tagger
    TrainAdur(TrainArgs),
    /// Train the relation classifier
    TrainAre(TrainArgs),
    /// Run the full pipeline and write one argument graph per section
    Predict(PredictArgs),
    /// Score predicted graphs against gold sections
    Evaluate(EvaluateArgs),
    /// Connector, type-pair and same-sentence profile of relation errors
    Analyze(AnalyzeArgs),
    /// Paired bootstrap comparison of two prediction files
    Bootstrap(BootstrapArgs),
    /// Dump relation candidates with their training labels
    Candidates(CandidatesArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    docs: usize,
    #[arg(long, default_value_t = 4)]
    sections_per_doc: usize,
    #[arg(long, default_value_t = 3)]
    sentences: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct PrepareArgs {
    /// Directory of GATE XML or brat files
    #[arg(long, env = "SAM_CORPUS")]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write train.jsonl and test.jsonl using the fixed document split
    #[arg(long)]
    split: bool,
    /// Check the published label counts and document split
    #[arg(long)]
    verify_table1: bool,
}

#[derive(Args)]
struct ConfigArgs {
    /// File of `key = value` lines, applied before --set
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one hyperparameter
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EmbedArgs {
    /// `hash:DIM:SEED` or `file:PATH`
    #[arg(long, default_value = "hash:64:0")]
    embed: String,
}

#[derive(Args)]
struct TrainArgs {
    /// Training sections (JSON-lines from `prepare`)
    #[arg(long)]
    train: PathBuf,
    /// Dev sections; without it the model is picked by document-level cross-validation
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    embed: EmbedArgs,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    adur: PathBuf,
    #[arg(long)]
    are: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Feed the gold units to relation extraction instead of the tagger's
    #[arg(long)]
    gold_adus: bool,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum DenominatorArg {
    Shorter,
    Longer,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    /// Span whose length a weak match is measured against
    #[arg(long, value_enum, default_value = "shorter")]
    denominator: DenominatorArg,
}

impl MatchArgs {
    fn mode(&self) -> MatchMode {
        match self.mode {
            Mode::Exact => MatchMode::Exact,
            Mode::Weak => MatchMode::Weak {
                denominator: match self.denominator {
                    DenominatorArg::Shorter => Denominator::Shorter,
                    DenominatorArg::Longer => Denominator::Longer,
                },
            },
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// Gold sections (JSON-lines from `prepare`)
    #[arg(long)]
    gold: PathBuf,
    /// Predicted graphs (JSON-lines from `predict`)
    #[arg(long)]
    pred: PathBuf,
    #[command(flatten)]
    matching: MatchArgs,
    /// Write the full report as JSON
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write both confusion matrices as CSV into this directory
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[command(flatten)]
    matching: MatchArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    /// Relation micro-F1
    Relations,
    /// Span macro-F1
    Spans,
    /// Token macro-F1
    Tokens,
}

#[derive(Args)]
struct BootstrapArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred_a: PathBuf,
    #[arg(long)]
    pred_b: PathBuf,
    #[arg(long, value_enum, default_value = "relations")]
    metric: Metric,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    sample_size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    matching: MatchArgs,
}

#[derive(Args)]
struct CandidatesArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Prepare(a) => prepare(a),
        Command::TrainAdur(a) => train_adur_cmd(a),
        Command::TrainAre(a) => train_are_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::Bootstrap(a) => bootstrap(a),
        Command::Candidates(a) => candidates(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

// ------------------------------------------------------------------ helpers

fn corpus_code(e: &CorpusError) -> u8 {
    match e {
        CorpusError::Io { .. } => exit::IO,
        _ => exit::PARSE,
    }
}

fn embed_code(e: &EmbedError) -> u8 {
    match e {
        EmbedError::Io(_) => exit::IO,
        EmbedError::BadSpec(_) => exit::CONFIG,
        _ => exit::PARSE,
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).code_ctx(exit::IO, format!("cannot create {}", dir.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).code_ctx(exit::IO, format!("cannot write {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn load_sections(path: &Path) -> CliResult<Vec<Document>> {
    let file = std::fs::File::open(path).code_ctx(exit::IO, format!("cannot open {}", path.display()))?;
    read_sections_jsonl(BufReader::new(file)).map_err(|e| Failure::new(corpus_code(&e), anyhow::Error::new(e).context(path.display().to_string())))
}

fn load_prepared(path: &Path) -> CliResult<Vec<PreparedSection>> {
    Ok(prepare_documents(&load_sections(path)?))
}

fn open_embeddings(spec: &str) -> CliResult<(EmbeddingSpec, Box<dyn EmbeddingSource>)> {
    let spec: EmbeddingSpec = spec.parse().code(exit::CONFIG)?;
    let source = spec.open().map_err(|e| Failure::new(embed_code(&e), e))?;
    Ok((spec, source))
}

fn features(source: &dyn EmbeddingSource, sections: &[PreparedSection]) -> CliResult<Vec<Array2<f64>>> {
    embed_all(source, sections).map_err(|e| Failure::new(embed_code(&e), e))
}

/// Defaults, then the config file, then `--set`, then `--seed`; validated.
fn resolve_config<T>(args: &ConfigArgs, validate: impl Fn(&T) -> Result<(), sam_core::config::ConfigError>) -> CliResult<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let mut overrides = match &args.config {
        Some(path) => read_config_file(path).code(exit::CONFIG)?,
        None => Vec::new(),
    };
    for raw in &args.set {
        overrides.push(parse_override(raw).ok_or_else(|| Failure::msg(exit::CONFIG, format!("expected KEY=VALUE, got `{raw}`")))?);
    }
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let config = apply_overrides(&T::default(), &overrides).code(exit::CONFIG)?;
    validate(&config).code(exit::CONFIG)?;
    eprintln!("config: {}", serde_json::to_string(&config).expect("configs serialize"));
    Ok(config)
}

fn load_predictions(path: &Path) -> CliResult<HashMap<String, ArgumentGraph>> {
    let text = std::fs::read_to_string(path).code_ctx(exit::IO, format!("cannot read {}", path.display()))?;
    let results = read_results_jsonl(&text).code_ctx(exit::PARSE, path.display().to_string())?;
    let mut out = HashMap::new();
    for r in results {
        let graph = match (r.graph, r.error) {
            (Some(g), _) => g,
            (None, err) => {
                log::warn!("{}: no prediction ({}), scored as empty", r.key, err.unwrap_or_default());
                ArgumentGraph::empty(r.key.clone())
            }
        };
        out.insert(r.key.to_string(), graph);
    }
    Ok(out)
}

/// Gold and predicted graph per gold section, in gold order.
fn paired_graphs(sections: &[PreparedSection], preds: &HashMap<String, ArgumentGraph>, source: &Path) -> CliResult<Vec<(ArgumentGraph, ArgumentGraph)>> {
    sections
        .iter()
        .map(|s| {
            let pred = preds
                .get(&s.key.to_string())
                .ok_or_else(|| Failure::msg(exit::PARSE, format!("{}: no prediction for section {}", source.display(), s.key)))?;
            Ok((gold_graph(s), pred.clone()))
        })
        .collect()
}

fn score(sections: &[PreparedSection], pairs: &[(ArgumentGraph, ArgumentGraph)], idx: Option<&[usize]>, mode: MatchMode) -> CliResult<FullReport> {
    let all: Vec<usize> = (0..sections.len()).collect();
    let evals: Vec<SectionEval<'_>> = idx
        .unwrap_or(&all)
        .iter()
        .map(|&i| SectionEval {
            gold: &pairs[i].0,
            pred: &pairs[i].1,
            tokens: &sections[i].tokens,
        })
        .collect();
    evaluate(&evals, mode).code(exit::PARSE)
}

// ----------------------------------------------------------------- commands

fn synth(a: SynthArgs) -> CliResult<()> {
    let spec = SyntheticSpec {
        docs: a.docs,
        sections_per_doc: a.sections_per_doc,
        sentences_per_section: a.sentences,
        seed: a.seed,
    };
    let docs = generate(&spec);
    write_corpus(&a.out, &docs).code_ctx(exit::IO, format!("cannot write {}", a.out.display()))?;
    println!("wrote {} documents to {}", docs.len(), a.out.display());
    Ok(())
}

fn write_sections(path: &Path, docs: &[Document]) -> CliResult<()> {
    let mut buf = Vec::new();
    write_sections_jsonl(docs, &mut buf).expect("writing to memory");
    write_file(path, &buf)
}

fn prepare(a: PrepareArgs) -> CliResult<()> {
    let docs = parse_corpus(&a.corpus).map_err(|e| Failure::new(corpus_code(&e), e))?;
    create_dir(&a.out)?;
    write_sections(&a.out.join("sections.jsonl"), &docs)?;
    let sections: Vec<_> = docs.iter().flat_map(|d| &d.sections).collect();
    let mut section_adus = BTreeMap::<String, usize>::new();
    let mut section_relations = BTreeMap::<String, usize>::new();
    for s in &sections {
        for adu in &s.adus {
            *section_adus.entry(adu.adu_type.to_string()).or_default() += 1;
        }
        for r in &s.relations {
            *section_relations.entry(r.label.to_string()).or_default() += 1;
        }
    }
    let stats = json!({
        "documents": docs.len(),
        "sections": sections.len(),
        "dropped_adus": docs.iter().map(|d| d.dropped_adus).sum::<usize>(),
        "dropped_relations": docs.iter().map(|d| d.dropped_relations).sum::<usize>(),
        "document_labels": label_stats(&docs),
        "section_adus": section_adus,
        "section_relations": section_relations,
    });
    write_json(&a.out.join("stats.json"), &stats)?;
    println!("{} documents, {} sections -> {}", docs.len(), sections.len(), a.out.display());
    if a.split {
        let (train, test) = make_split(&docs).code(exit::CONFIG)?;
        write_sections(&a.out.join("train.jsonl"), &train)?;
        write_sections(&a.out.join("test.jsonl"), &test)?;
        println!("split: {} train, {} test documents", train.len(), test.len());
    }
    if a.verify_table1 {
        let problems = verify_table1(&docs).code(exit::VERIFICATION)?;
        if !problems.is_empty() {
            for p in &problems {
                eprintln!("mismatch: {p}");
            }
            return Err(Failure::msg(exit::VERIFICATION, format!("{} label counts differ from the reference", problems.len())));
        }
        println!("reference counts and 30/9 split verified");
    }
    Ok(())
}

/// Everything a training command needs after loading its inputs.
struct TrainInputs {
    spec: EmbeddingSpec,
    train: Vec<PreparedSection>,
    train_x: Vec<Array2<f64>>,
    dev: Option<(Vec<PreparedSection>, Vec<Array2<f64>>)>,
}

fn load_train_inputs(a: &TrainArgs, folds: usize) -> CliResult<TrainInputs> {
    let (spec, source) = open_embeddings(&a.embed.embed)?;
    let train = load_prepared(&a.train)?;
    let train_x = features(source.as_ref(), &train)?;
    let dev = match &a.dev {
        Some(path) => {
            let dev = load_prepared(path)?;
            let x = features(source.as_ref(), &dev)?;
            Some((dev, x))
        }
        None => {
            let docs = train.iter().map(|s| &s.key.doc_id).collect::<std::collections::BTreeSet<_>>().len();
            if folds > 1 && folds > docs {
                return Err(Failure::msg(exit::CONFIG, format!("{folds} folds need at least {folds} training documents, found {docs}")));
            }
            None
        }
    };
    create_dir(&a.out)?;
    Ok(TrainInputs { spec, train, train_x, dev })
}

/// Trains on the dev split if given, otherwise cross-validates.
fn run_training<M, E>(
    inputs: &TrainInputs,
    direct: impl Fn(&[sam_core::data::Example<'_>], &[sam_core::data::Example<'_>]) -> Result<Trained<M>, E>,
    cv: impl Fn(&[sam_core::data::Example<'_>]) -> Result<CvResult<M>, E>,
) -> Result<(Trained<M>, serde_json::Value), E> {
    let train = examples(&inputs.train, &inputs.train_x);
    match &inputs.dev {
        Some((dev, dev_x)) => {
            let trained = direct(&train, &examples(dev, dev_x))?;
            Ok((trained, json!({ "dev_sections": dev.len() })))
        }
        None => {
            let cv = cv(&train)?;
            Ok((cv.best, json!({ "best_fold": cv.best_fold, "fold_scores": cv.fold_scores })))
        }
    }
}

fn train_log(inputs: &TrainInputs, config: &impl Serialize, selection: serde_json::Value, log: &impl Serialize) -> serde_json::Value {
    json!({
        "embed": inputs.spec.to_string(),
        "config": config,
        "train_sections": inputs.train.len(),
        "selection": selection,
        "log": log,
    })
}

fn train_adur_cmd(a: TrainArgs) -> CliResult<()> {
    let config: AdurConfig = resolve_config(&a.config, AdurConfig::validate)?;
    let inputs = load_train_inputs(&a, config.folds)?;
    let result = run_training(&inputs, |t, d| train_adur(t, d, &config), |ex| cross_validate_adur(ex, &config));
    let (trained, selection) = match result {
        Ok(r) => r,
        Err(AdurError::Diverged(d)) => {
            write_file(&a.out.join("adur.last_good.ckpt"), &d.last_good.model.to_checkpoint().to_bytes())?;
            write_json(&a.out.join("adur_log.json"), &train_log(&inputs, &config, json!({ "diverged_epoch": d.epoch }), &d.last_good.log))?;
            return Err(Failure::new(exit::TRAINING, AdurError::Diverged(d)));
        }
        Err(e) => return Err(Failure::new(exit::TRAINING, e)),
    };
    write_file(&a.out.join("adur.ckpt"), &trained.model.to_checkpoint().to_bytes())?;
    write_json(&a.out.join("adur_log.json"), &train_log(&inputs, &config, selection, &trained.log))?;
    println!(
        "best dev token macro-F1 {:.4} at epoch {}, stopped after epoch {} ({})",
        trained.log.best_dev_score, trained.log.best_epoch, trained.log.stopped_epoch, serde_json::to_value(trained.log.stop_reason).expect("serializes").as_str().unwrap_or_default()
    );
    Ok(())
}

fn train_are_cmd(a: TrainArgs) -> CliResult<()> {
    let config: AreConfig = resolve_config(&a.config, AreConfig::validate)?;
    let inputs = load_train_inputs(&a, config.folds)?;
    let result = run_training(&inputs, |t, d| train_are(t, d, &config), |ex| cross_validate_are(ex, &config));
    let (trained, selection) = match result {
        Ok(r) => r,
        Err(AreError::Diverged(d)) => {
            write_file(&a.out.join("are.last_good.ckpt"), &d.last_good.model.to_checkpoint().to_bytes())?;
            write_json(&a.out.join("are_log.json"), &train_log(&inputs, &config, json!({ "diverged_epoch": d.epoch }), &d.last_good.log))?;
            return Err(Failure::new(exit::TRAINING, AreError::Diverged(d)));
        }
        Err(e) => return Err(Failure::new(exit::TRAINING, e)),
    };
    write_file(&a.out.join("are.ckpt"), &trained.model.to_checkpoint().to_bytes())?;
    write_json(&a.out.join("are_log.json"), &train_log(&inputs, &config, selection, &trained.log))?;
    println!(
        "best dev relation micro-F1 {:.4} at epoch {}, stopped after epoch {} ({})",
        trained.log.best_dev_score, trained.log.best_epoch, trained.log.stopped_epoch, serde_json::to_value(trained.log.stop_reason).expect("serializes").as_str().unwrap_or_default()
    );
    Ok(())
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    Checkpoint::load(path).code_ctx(exit::CHECKPOINT, path.display().to_string())
}

fn predict(a: PredictArgs) -> CliResult<()> {
    let adur = AdurModel::from_checkpoint(&load_checkpoint(&a.adur)?).code_ctx(exit::CHECKPOINT, a.adur.display().to_string())?;
    let are = AreModel::from_checkpoint(&load_checkpoint(&a.are)?).code_ctx(exit::CHECKPOINT, a.are.display().to_string())?;
    let (spec, source) = open_embeddings(&a.embed.embed)?;
    for (name, dim) in [("tagger", adur.embed_dim), ("relation", are.embed_dim)] {
        if dim != source.dim() {
            return Err(Failure::msg(exit::CHECKPOINT, format!("{name} checkpoint expects {dim}-dim embeddings, {spec} gives {}", source.dim())));
        }
    }
    let sections = load_prepared(&a.data)?;
    let x = features(source.as_ref(), &sections)?;
    let unit_source = if a.gold_adus { UnitSource::Gold } else { UnitSource::Predicted };
    let results = run_corpus(&adur, &are, &examples(&sections, &x), unit_source);
    let mut buf = Vec::new();
    write_results_jsonl(&results, &mut buf).expect("writing to memory");
    write_file(&a.out, &buf)?;
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    println!("{} sections -> {}", results.len(), a.out.display());
    if failed > 0 {
        return Err(Failure::msg(exit::INFERENCE, format!("{failed} of {} sections failed", results.len())));
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> CliResult<()> {
    let sections = load_prepared(&a.gold)?;
    let pairs = paired_graphs(&sections, &load_predictions(&a.pred)?, &a.pred)?;
    let report = score(&sections, &pairs, None, a.matching.mode())?;
    print!("{}", report.to_text());
    if let Some(path) = &a.json {
        write_json(path, &report)?;
    }
    if let Some(dir) = &a.csv_dir {
        create_dir(dir)?;
        write_file(&dir.join("adu_confusion.csv"), report.adu_confusion.to_csv().as_bytes())?;
        write_file(&dir.join("relation_confusion.csv"), report.relation_confusion.to_csv().as_bytes())?;
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> CliResult<()> {
    let sections = load_prepared(&a.gold)?;
    let pairs = paired_graphs(&sections, &load_predictions(&a.pred)?, &a.pred)?;
    let mut total = ErrorFeatureReport::default();
    for (s, (gold, pred)) in sections.iter().zip(&pairs) {
        total.add(&error_feature_report(pred, gold, &s.text, a.matching.mode()));
    }
    println!("{}", serde_json::to_string_pretty(&total).expect("reports serialize"));
    Ok(())
}

fn bootstrap(a: BootstrapArgs) -> CliResult<()> {
    let sections = load_prepared(&a.gold)?;
    let pairs_a = paired_graphs(&sections, &load_predictions(&a.pred_a)?, &a.pred_a)?;
    let pairs_b = paired_graphs(&sections, &load_predictions(&a.pred_b)?, &a.pred_b)?;
    let mode = a.matching.mode();
    let pick = |r: &FullReport| match a.metric {
        Metric::Relations => r.relations.micro.f1,
        Metric::Spans => r.adu_spans.macro_f1,
        Metric::Tokens => r.adu_tokens.macro_f1,
    };
    let mut failure = None;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let result = bootstrap_compare(
        sections.len(),
        a.samples,
        a.sample_size,
        |idx| match (score(&sections, &pairs_a, Some(idx), mode), score(&sections, &pairs_b, Some(idx), mode)) {
            (Ok(ra), Ok(rb)) => (pick(&ra), pick(&rb)),
            (Err(e), _) | (_, Err(e)) => {
                failure.get_or_insert(e);
                (f64::NAN, f64::NAN)
            }
        },
        &mut rng,
    )
    .code(exit::CONFIG)?;
    if let Some(f) = failure {
        return Err(f);
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "mean_a": result.mean_a,
            "mean_b": result.mean_b,
            "p_value": result.p_value,
            "samples": a.samples,
            "sample_size": a.sample_size,
        }))
        .expect("reports serialize")
    );
    Ok(())
}

fn candidates(a: CandidatesArgs) -> CliResult<()> {
    let config: AreConfig = resolve_config(&a.config, AreConfig::validate)?;
    let sections = load_prepared(&a.data)?;
    let mut buf = Vec::new();
    let mut n = 0;
    for s in &sections {
        for rec in candidate_records(s, &config) {
            serde_json::to_writer(&mut buf, &rec).expect("records serialize");
            buf.write_all(b"\n").expect("writing to memory");
            n += 1;
        }
    }
    write_file(&a.out, &buf)?;
    println!("{n} candidates -> {}", a.out.display());
    Ok(())
}
