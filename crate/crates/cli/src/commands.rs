use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use hemeval_core::attr_metrics::{attribute_report, AttributeReport, PlausibilityMap, DEFAULT_PLAUSIBILITY};
use hemeval_core::classify::{evaluate, fit_prototypes, split};
use hemeval_core::extract::{cross_attribute_overlaps, extract_corpus, CompiledLexicon};
use hemeval_core::ingest::{
    join_captions, load_attribute_table, load_caption_pairs, load_captions, load_embeddings, load_extractions,
    AttributeTable,
};
use hemeval_core::report::{attribute_markdown, AttrFragment, ClassifyFragment, EvalFragment, Report};
use hemeval_core::synth::{verify_faithfulness, CaptionSynth, TemplateSet, DEFAULT_TEMPLATES};
use hemeval_core::text_metrics::{
    corpus_scores, EmbeddingProvider, EvalOptions, FileProvider, HashedProvider, MetricSet, OneHotProvider, Smoothing,
};
use hemeval_core::{
    AttributeSchema, CaptionMetrics, CaptionPair, EmbeddingSet, ExtractionResult, Lexicon, DEFAULT_LEXICON,
    DEFAULT_SCHEMA,
};

use crate::output::{with_meta, Meta, OutDir};

/// A failure with its process exit code: 2 for bad input, 1 otherwise.
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn input(error: anyhow::Error) -> Self {
        CliError { code: 2, error }
    }

    pub fn internal(error: anyhow::Error) -> Self {
        CliError { code: 1, error }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        CliError::internal(error)
    }
}

trait InputExt<T> {
    fn input(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> InputExt<T> for Result<T, E> {
    fn input(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::input(e.into()))
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "hemeval", version, about = "Caption synthesis, attribute extraction and evaluation for blood-cell images")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render attribute records into template captions.
    Synth(SynthArgs),
    /// Extract attribute values from captions.
    Extract(ExtractArgs),
    /// Score candidate captions against references.
    Eval(EvalArgs),
    /// Feature accuracy, confusion matrices and plausible errors.
    AttrEval(AttrEvalArgs),
    /// Nearest-class-mean cosine classifier on frozen embeddings.
    Classify(ClassifyArgs),
    /// Combine result files into one report.
    Report(ReportArgs),
    /// Check schema, lexicon, templates and plausibility map.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Default)]
struct Resources {
    /// Attribute schema JSON (default: bundled).
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Lexicon JSON (default: bundled).
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

impl Resources {
    fn schema(&self, meta: &mut Meta) -> CliResult<AttributeSchema> {
        meta.input_or_bundled("schema", self.schema.as_deref(), DEFAULT_SCHEMA).input()?;
        match &self.schema {
            Some(p) => AttributeSchema::load(p).input(),
            None => Ok(AttributeSchema::default_schema()),
        }
    }

    fn lexicon(&self, meta: &mut Meta, schema: &AttributeSchema) -> CliResult<Lexicon> {
        meta.input_or_bundled("lexicon", self.lexicon.as_deref(), DEFAULT_LEXICON).input()?;
        let lexicon = match &self.lexicon {
            Some(p) => Lexicon::load(p).input()?,
            None => Lexicon::default_lexicon(),
        };
        lexicon.validate(schema).input()?;
        Ok(lexicon)
    }
}

fn load_templates(path: Option<&Path>, meta: &mut Meta) -> CliResult<TemplateSet> {
    meta.input_or_bundled("templates", path, DEFAULT_TEMPLATES).input()?;
    match path {
        Some(p) => TemplateSet::load(p).input(),
        None => Ok(TemplateSet::default_templates()),
    }
}

fn load_plausibility(path: Option<&Path>, meta: &mut Meta) -> CliResult<PlausibilityMap> {
    meta.input_or_bundled("plausibility", path, DEFAULT_PLAUSIBILITY).input()?;
    match path {
        Some(p) => PlausibilityMap::load(p).input(),
        None => Ok(PlausibilityMap::default_map()),
    }
}

fn load_truth(path: &Path, schema: &AttributeSchema, role: &str, meta: &mut Meta) -> CliResult<AttributeTable> {
    meta.input(role, path).input()?;
    let table = load_attribute_table(path, schema).input()?;
    for r in &table.rejects {
        eprintln!("{}: row {} rejected: {}", path.display(), r.row, r.reason);
    }
    Ok(table)
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Attribute table CSV.
    #[arg(long)]
    records: PathBuf,
    #[command(flatten)]
    resources: Resources,
    /// Template set JSON (default: bundled).
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    variants: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Serialize)]
struct RejectLine<'a> {
    row: usize,
    image_id: Option<&'a str>,
    reason: &'a str,
}

fn synth(args: SynthArgs) -> CliResult {
    let mut meta = Meta::new("synth", Some(args.seed), json!({ "variants": args.variants }));
    let schema = args.resources.schema(&mut meta)?;
    let lexicon = args.resources.lexicon(&mut meta, &schema)?;
    let templates = load_templates(args.templates.as_deref(), &mut meta)?;
    let table = load_truth(&args.records, &schema, "records", &mut meta)?;
    let synth = CaptionSynth::new(&schema, &lexicon, &templates).input()?;
    let captions = synth.corpus(&table.records, args.variants, args.seed).input()?;

    let compiled = CompiledLexicon::compile(&lexicon).input()?;
    let by_id: BTreeMap<&str, _> = table.records.iter().map(|r| (r.image_id.as_str(), r)).collect();
    let mut unfaithful = Vec::new();
    for c in &captions {
        let f = verify_faithfulness(&c.text, by_id[c.image_id.as_str()], &compiled, &schema);
        if !f.passed() {
            unfaithful.push(json!({ "image_id": c.image_id, "variant": c.variant, "faithfulness": f }));
        }
    }

    let out = OutDir::create(&args.out_dir)?;
    out.write_jsonl("captions.jsonl", &captions)?;
    let rejects: Vec<RejectLine> = table
        .rejects
        .iter()
        .map(|r| RejectLine { row: r.row, image_id: r.image_id.as_deref(), reason: &r.reason })
        .collect();
    out.write_jsonl("rejects.jsonl", &rejects)?;
    let summary = json!({
        "n_records": table.records.len(),
        "n_rejects": table.rejects.len(),
        "n_captions": captions.len(),
        "unfaithful": unfaithful,
    });
    out.write_json("synth.json", &with_meta(&meta, &summary)?)?;
    println!(
        "{} records, {} rejects, {} captions, {} unfaithful",
        table.records.len(),
        table.rejects.len(),
        captions.len(),
        unfaithful.len()
    );
    Ok(())
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Captions JSONL with `image_id` and a text field.
    #[arg(long)]
    captions: PathBuf,
    #[arg(long, default_value = "text")]
    text_field: String,
    #[command(flatten)]
    resources: Resources,
    #[arg(long)]
    out_dir: PathBuf,
}

fn extract(args: ExtractArgs) -> CliResult {
    let mut meta = Meta::new("extract", None, json!({ "text_field": args.text_field }));
    let schema = args.resources.schema(&mut meta)?;
    let lexicon = args.resources.lexicon(&mut meta, &schema)?;
    meta.input("captions", &args.captions).input()?;
    let captions = load_captions(&args.captions, &args.text_field).input()?;
    let compiled = CompiledLexicon::compile(&lexicon).input()?;
    let results = extract_corpus(&captions, &compiled, &schema);

    let out = OutDir::create(&args.out_dir)?;
    let lines: Vec<_> = results.iter().map(ExtractionResult::to_line).collect();
    out.write_jsonl("extraction.jsonl", &lines)?;
    let n_conflicts: usize = results.iter().map(|r| r.conflicts.len()).sum();
    let summary = json!({ "n_captions": results.len(), "n_conflicts": n_conflicts });
    out.write_json("extract.json", &with_meta(&meta, &summary)?)?;
    println!("{} captions, {} conflicts", results.len(), n_conflicts);
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SmoothingArg {
    None,
    Epsilon,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("internal").required(true).args(["pairs", "references"]))]
struct EvalArgs {
    /// Pairs JSONL with `image_id`, `reference`, `candidate`.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Reference captions JSONL, joined with `--candidates` by `image_id`.
    #[arg(long, requires = "candidates", conflicts_with = "pairs")]
    references: Option<PathBuf>,
    #[arg(long, requires = "references")]
    candidates: Option<PathBuf>,
    /// Pairs JSONL of an external test set.
    #[arg(long, conflicts_with = "external_references")]
    external_pairs: Option<PathBuf>,
    #[arg(long, requires = "external_candidates")]
    external_references: Option<PathBuf>,
    #[arg(long, requires = "external_references")]
    external_candidates: Option<PathBuf>,
    /// Text field of `--references`/`--candidates` files.
    #[arg(long, default_value = "text")]
    text_field: String,
    #[arg(long, default_value = "bleu,rougeL,bertscore")]
    metrics: String,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    bleu_max_n: u64,
    #[arg(long, value_enum, default_value = "epsilon")]
    smoothing: SmoothingArg,
    /// `one_hot`, `hashed:<seed>` or `file:<path>`.
    #[arg(long, default_value = "one_hot")]
    provider: String,
    /// Model name used in reports.
    #[arg(long, default_value = "model")]
    model: String,
    #[arg(long)]
    out_dir: PathBuf,
}

fn provider(spec: &str, meta: &mut Meta) -> CliResult<Box<dyn EmbeddingProvider>> {
    if spec == "one_hot" {
        return Ok(Box::new(OneHotProvider::new()));
    }
    if let Some(seed) = spec.strip_prefix("hashed:") {
        let seed: u64 = seed.parse().map_err(|_| CliError::input(anyhow!("invalid hashed provider seed `{seed}`")))?;
        return Ok(Box::new(HashedProvider::new(seed)));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        meta.input("token_embeddings", Path::new(path)).input()?;
        return Ok(Box::new(FileProvider::load(path).input()?));
    }
    Err(CliError::input(anyhow!("unknown provider `{spec}`; expected one_hot, hashed:<seed> or file:<path>")))
}

fn load_pairs(
    pairs: Option<&Path>,
    references: Option<&Path>,
    candidates: Option<&Path>,
    text_field: &str,
    prefix: &str,
    meta: &mut Meta,
) -> CliResult<Option<Vec<CaptionPair>>> {
    if let Some(p) = pairs {
        meta.input(&format!("{prefix}pairs"), p).input()?;
        return load_caption_pairs(p).input().map(Some);
    }
    match (references, candidates) {
        (Some(r), Some(c)) => {
            meta.input(&format!("{prefix}references"), r).input()?;
            meta.input(&format!("{prefix}candidates"), c).input()?;
            let refs = load_captions(r, text_field).input()?;
            let cands = load_captions(c, text_field).input()?;
            join_captions(&refs, &cands).input().map(Some)
        }
        _ => Ok(None),
    }
}

fn eval(args: EvalArgs) -> CliResult {
    let metrics = MetricSet::parse(&args.metrics).map_err(|e| CliError::input(anyhow!(e)))?;
    let options = EvalOptions {
        metrics,
        bleu_max_n: args.bleu_max_n as usize,
        smoothing: match args.smoothing {
            SmoothingArg::None => Smoothing::None,
            SmoothingArg::Epsilon => Smoothing::Epsilon,
        },
    };
    let mut meta = Meta::new(
        "eval",
        None,
        json!({
            "metrics": options.metrics,
            "bleu_max_n": options.bleu_max_n,
            "smoothing": options.smoothing,
            "provider": args.provider,
            "aggregation": "sentence_mean",
            "bertscore": { "idf": false, "baseline_rescale": false },
        }),
    );
    let provider = if metrics.bertscore { Some(provider(&args.provider, &mut meta)?) } else { None };
    let internal = load_pairs(
        args.pairs.as_deref(),
        args.references.as_deref(),
        args.candidates.as_deref(),
        &args.text_field,
        "",
        &mut meta,
    )?
    .expect("clap enforces an internal input");
    let external = load_pairs(
        args.external_pairs.as_deref(),
        args.external_references.as_deref(),
        args.external_candidates.as_deref(),
        &args.text_field,
        "external_",
        &mut meta,
    )?;

    let score = |pairs: &[CaptionPair]| corpus_scores(pairs, provider.as_deref(), &options);
    let internal: CaptionMetrics = score(&internal);
    let external: Option<CaptionMetrics> = external.as_deref().map(score);

    let out = OutDir::create(&args.out_dir)?;
    out.write_jsonl("pairs.jsonl", &internal.per_pair)?;
    if let Some(e) = &external {
        out.write_jsonl("pairs_external.jsonl", &e.per_pair)?;
    }
    let fragment = EvalFragment {
        model: args.model,
        internal: internal.aggregate,
        external: external.map(|e| e.aggregate),
    };
    out.write_json("eval.json", &with_meta(&meta, &fragment)?)?;
    let report = Report { caption_metrics: vec![fragment], ..Default::default() };
    out.write("eval.md", &report.to_markdown())?;
    Ok(())
}

#[derive(Args, Debug)]
struct AttrEvalArgs {
    /// Extraction JSONL written by `extract`.
    #[arg(long)]
    extraction: PathBuf,
    /// Ground-truth attribute table CSV.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, requires = "external_truth")]
    external_extraction: Option<PathBuf>,
    #[arg(long, requires = "external_extraction")]
    external_truth: Option<PathBuf>,
    /// Plausible-confusion map JSON (default: bundled).
    #[arg(long)]
    plausibility: Option<PathBuf>,
    /// Attribute schema JSON (default: bundled).
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value = "model")]
    model: String,
    #[arg(long)]
    out_dir: PathBuf,
}

fn attr_report(
    extraction: &Path,
    truth: &Path,
    prefix: &str,
    schema: &AttributeSchema,
    plausibility: &PlausibilityMap,
    meta: &mut Meta,
) -> CliResult<AttributeReport> {
    meta.input(&format!("{prefix}extraction"), extraction).input()?;
    let extracted = load_extractions(extraction).input()?;
    let table = load_truth(truth, schema, &format!("{prefix}truth"), meta)?;
    let report = attribute_report(&extracted, &table.records, schema, plausibility).input()?;
    if !report.accuracy.unmatched_truth.is_empty() {
        eprintln!("{} truth records have no extraction", report.accuracy.unmatched_truth.len());
    }
    Ok(report)
}

fn attr_eval(args: AttrEvalArgs) -> CliResult {
    let mut meta = Meta::new("attr-eval", None, json!({ "unmentioned_counts_as_error": true }));
    let resources = Resources { schema: args.schema.clone(), lexicon: None };
    let schema = resources.schema(&mut meta)?;
    let plausibility = load_plausibility(args.plausibility.as_deref(), &mut meta)?;
    plausibility.validate(&schema).input()?;
    let internal = attr_report(&args.extraction, &args.truth, "", &schema, &plausibility, &mut meta)?;
    let external = match (&args.external_extraction, &args.external_truth) {
        (Some(e), Some(t)) => Some(attr_report(e, t, "external_", &schema, &plausibility, &mut meta)?),
        _ => None,
    };

    let out = OutDir::create(&args.out_dir)?;
    let mut md = attribute_markdown(&format!("{} (Int.)", args.model), &internal);
    if let Some(e) = &external {
        md.push('\n');
        md.push_str(&attribute_markdown(&format!("{} (Ext.)", args.model), e));
    }
    out.write("attr.md", &md)?;
    let fragment = AttrFragment { model: args.model, internal, external };
    out.write_json("attr.json", &with_meta(&meta, &fragment)?)?;
    Ok(())
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["train", "data"]))]
struct ClassifyArgs {
    /// Training embeddings JSONL.
    #[arg(long, requires = "test")]
    train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    test: Option<PathBuf>,
    /// Embeddings JSONL to split into train and test.
    #[arg(long, conflicts_with_all = ["train", "test"])]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Label to classify; repeat for several tasks.
    #[arg(long = "label", required = true)]
    labels: Vec<String>,
    /// Embeddings JSONL of an external test set.
    #[arg(long)]
    external_test: Option<PathBuf>,
    /// Backbone name used in reports.
    #[arg(long, default_value = "backbone")]
    backbone: String,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct ClassifyOutput {
    results: Vec<ClassifyFragment>,
}

fn load_set(path: &Path, role: &str, meta: &mut Meta) -> CliResult<EmbeddingSet> {
    meta.input(role, path).input()?;
    load_embeddings(path).input()
}

fn classify(args: ClassifyArgs) -> CliResult {
    let seed = args.data.as_ref().map(|_| args.seed);
    let options = match &args.data {
        Some(_) => json!({ "labels": args.labels, "test_fraction": args.test_fraction, "split": "stratified_chacha8" }),
        None => json!({ "labels": args.labels }),
    };
    let mut meta = Meta::new("classify", seed, options);
    let data = match &args.data {
        Some(p) => Some(load_set(p, "data", &mut meta)?),
        None => None,
    };
    let given = match (&args.train, &args.test) {
        (Some(tr), Some(te)) => Some((load_set(tr, "train", &mut meta)?, load_set(te, "test", &mut meta)?)),
        _ => None,
    };
    let external = match &args.external_test {
        Some(p) => Some(load_set(p, "external_test", &mut meta)?),
        None => None,
    };

    let mut results = Vec::new();
    for label in &args.labels {
        let (train, test) = match (&data, &given) {
            (Some(d), _) => split(d, label, args.test_fraction, args.seed).input()?,
            (None, Some((tr, te))) => (tr.clone(), te.clone()),
            (None, None) => unreachable!("clap enforces an input source"),
        };
        let prototypes = fit_prototypes(&train, label).input()?;
        let internal = evaluate(&test, &prototypes, label).input()?;
        let external = match &external {
            Some(e) => Some(evaluate(e, &prototypes, label).input()?),
            None => None,
        };
        println!("{label}: accuracy {:.3}, weighted F1 {:.3}", internal.accuracy, internal.weighted_f1);
        results.push(ClassifyFragment { backbone: args.backbone.clone(), task: label.clone(), internal, external });
    }

    let out = OutDir::create(&args.out_dir)?;
    let output = ClassifyOutput { results };
    out.write_json("classify.json", &with_meta(&meta, &output)?)?;
    let report = Report { classification: output.results, ..Default::default() };
    out.write("classify.md", &report.to_markdown())?;
    Ok(())
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("fragments").required(true).multiple(true).args(["eval", "attr", "classify"]))]
struct ReportArgs {
    /// `eval.json` files, one per model.
    #[arg(long)]
    eval: Vec<PathBuf>,
    /// `attr.json` files, one per model.
    #[arg(long)]
    attr: Vec<PathBuf>,
    /// `classify.json` files, one per backbone.
    #[arg(long)]
    classify: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn read_fragment<T: for<'de> Deserialize<'de>>(path: &Path, role: String, meta: &mut Meta) -> CliResult<T> {
    meta.input(&role, path).input()?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(anyhow!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(anyhow!("{}: {e}", path.display())))
}

fn report(args: ReportArgs) -> CliResult {
    let mut meta = Meta::new("report", None, Value::Null);
    let mut report = Report::default();
    for (i, p) in args.eval.iter().enumerate() {
        report.caption_metrics.push(read_fragment(p, format!("eval_{i}"), &mut meta)?);
    }
    for (i, p) in args.attr.iter().enumerate() {
        report.feature_accuracy.push(read_fragment(p, format!("attr_{i}"), &mut meta)?);
    }
    for (i, p) in args.classify.iter().enumerate() {
        let output: ClassifyOutput = read_fragment(p, format!("classify_{i}"), &mut meta)?;
        report.classification.extend(output.results);
    }
    let out = OutDir::create(&args.out_dir)?;
    out.write_json("report.json", &with_meta(&meta, &report)?)?;
    out.write("report.md", &report.to_markdown())?;
    Ok(())
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    resources: Resources,
    /// Template set JSON (default: bundled).
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Plausible-confusion map JSON (default: bundled).
    #[arg(long)]
    plausibility: Option<PathBuf>,
    /// Also write `validate.json` here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn validate(args: ValidateArgs) -> CliResult {
    let mut meta = Meta::new("validate", None, Value::Null);
    let schema = args.resources.schema(&mut meta)?;
    let lexicon = args.resources.lexicon(&mut meta, &schema)?;
    let templates = load_templates(args.templates.as_deref(), &mut meta)?;
    templates.validate(&schema).input()?;
    load_plausibility(args.plausibility.as_deref(), &mut meta)?.validate(&schema).input()?;
    let compiled = CompiledLexicon::compile(&lexicon).input()?;
    let mut warnings = templates.lint(&compiled);
    warnings.extend(cross_attribute_overlaps(&lexicon, &compiled));
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("ok: {} attributes, {} templates, {} warnings", schema.attributes.len(), templates.templates.len(), warnings.len());
    if let Some(dir) = &args.out_dir {
        let out = OutDir::create(dir)?;
        out.write_json("validate.json", &with_meta(&meta, &json!({ "valid": true, "warnings": warnings }))?)?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::Eval(a) => eval(a),
        Command::AttrEval(a) => attr_eval(a),
        Command::Classify(a) => classify(a),
        Command::Report(a) => report(a),
        Command::Validate(a) => validate(a),
    }
}
