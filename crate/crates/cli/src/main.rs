//! `coa`: convert annotations, build cold-start manifests, validate and score
//! responses, train toy policies, and evaluate predictions.
//!
//! Exit codes: 0 success, 1 domain error (JSON object on stderr), 2 usage.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use coa_core::config::{RunConfig, RunMode};
use coa_core::data::{
    self, build_cold_start_manifest, convert_annotations, import_cold_start_responses, sample_split, AnnotationRow,
    ColdStartRecord, DatasetKind, ImageEntry, QaRecord, TemplatePools, DEFAULT_QA_TEMPLATE,
};
use coa_core::format::{self, FormatMode};
use coa_core::grpo::{shuffled_indices, GrpoTrainer, TrainLog};
use coa_core::metrics::{self, Averaging, ClassScope, EvalOptions, EvalRecord};
use coa_core::policy::{sft_batch_step, Choice, PolicyParams};
use coa_core::reward::{extract_entities, GateMode, RewardSpec, Vocabulary};
use coa_core::{PolicyKind, SeedTree};

#[derive(Parser)]
#[command(name = "coa", version, about = "Four-section reasoning format, verifiable rewards and toy GRPO training")]
struct Cli {
    /// Worker threads for parallel stages (default: logical CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert recognition annotations into QA records.
    Convert {
        #[arg(long)]
        dataset: DatasetKind,
        /// JSONL rows: {frame_id, image?, labels: [...], split?}.
        #[arg(long)]
        annotations: PathBuf,
        /// JSON file: {dataset_name, entries: [...]}.
        #[arg(long)]
        vocab: PathBuf,
        /// Question template containing `{candidates}`.
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write unconvertible frames (JSONL).
        #[arg(long)]
        failures: Option<PathBuf>,
    },
    /// Build a cold-start question manifest.
    ColdstartManifest {
        /// JSONL rows: {image, title}.
        #[arg(long)]
        images: PathBuf,
        /// Description, recognition, reasoning shares.
        #[arg(long, value_delimiter = ',', default_value = "0.375,0.375,0.25")]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON file with `description`, `recognition`, `reasoning` template lists.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attach externally generated responses to a cold-start manifest.
    ColdstartImport {
        #[arg(long)]
        manifest: PathBuf,
        /// JSONL rows: {id, response}.
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Check responses against the section format.
    Validate {
        #[arg(long, value_enum, default_value_t = ModeArg::Coa)]
        mode: ModeArg,
        /// A response file, a JSONL file of {id?, response}, or `-` for stdin.
        #[arg(long, default_value = "-")]
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Score responses against ground truth.
    Score {
        /// Run config; only [reward] and [data].vocab are used.
        #[arg(long)]
        spec: PathBuf,
        /// JSONL rows: {id, response}.
        #[arg(long)]
        input: PathBuf,
        /// QA records (JSONL).
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a toy policy with SFT or GRPO.
    TrainToy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate predictions against ground truth.
    Eval {
        /// JSONL rows: {id, pred_entities: [...]} or {id, response}.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Format gate applied to `response` rows.
        #[arg(long, value_enum, default_value_t = GateArg::Coa)]
        mode: GateArg,
        #[arg(long, value_enum, default_value_t = AveragingArg::Example)]
        averaging: AveragingArg,
        #[arg(long, value_enum, default_value_t = ScopeArg::Present)]
        class_scope: ScopeArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        per_class_csv: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Coa,
    Cot,
}

#[derive(Clone, Copy, ValueEnum)]
enum GateArg {
    Coa,
    Cot,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum AveragingArg {
    Example,
    Micro,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Present,
    FullVocabulary,
}

impl From<ModeArg> for FormatMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Coa => FormatMode::Coa,
            ModeArg::Cot => FormatMode::Cot,
        }
    }
}

impl From<GateArg> for GateMode {
    fn from(m: GateArg) -> Self {
        match m {
            GateArg::Coa => GateMode::Coa,
            GateArg::Cot => GateMode::Cot,
            GateArg::None => GateMode::None,
        }
    }
}

/// A domain failure, reported as JSON on stderr.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
    details: Value,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Self {
            kind,
            message: message.to_string(),
            details: Value::Null,
        }
    }

    fn with(mut self, details: Value) -> Self {
        self.details = details;
        self
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::new("io", format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(io_err(path))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(io_err(path))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    data::read_jsonl(BufReader::new(file)).map_err(|e| Failure::new("parse", format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Failure::new("parse", format!("{}: {e}", path.display())))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(io_err(dir)),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, contents).map_err(io_err(path))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    data::write_jsonl(&mut buf, items).map_err(|e| Failure::new("io", e))?;
    write_file(path, &buf)
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable")
}

fn record_vocabulary(records: &[QaRecord]) -> Result<Vocabulary> {
    let first = records.first().ok_or_else(|| Failure::new("empty_input", "no QA records"))?;
    let vocab = first.vocabulary().map_err(|e| Failure::new("vocabulary", format!("record `{}`: {e}", first.id)))?;
    for r in records {
        let v = r.vocabulary().map_err(|e| Failure::new("vocabulary", format!("record `{}`: {e}", r.id)))?;
        if v.entries() != vocab.entries() {
            return Err(Failure::new(
                "vocabulary",
                format!("record `{}` uses a different vocabulary from `{}`", r.id, first.id),
            ));
        }
    }
    Ok(vocab)
}

fn load_vocabulary(path: Option<&Path>, records: &[QaRecord]) -> Result<Vocabulary> {
    match path {
        Some(p) => read_json(p),
        None => record_vocabulary(records),
    }
}

fn truth_index(records: &[QaRecord]) -> Result<BTreeMap<&str, &QaRecord>> {
    let mut index = BTreeMap::new();
    for r in records {
        if index.insert(r.id.as_str(), r).is_some() {
            return Err(Failure::new("duplicate_id", format!("duplicate truth id `{}`", r.id)));
        }
    }
    Ok(index)
}

fn ground_truth(vocab: &Vocabulary, record: &QaRecord) -> Result<coa_core::EntitySet> {
    vocab
        .set_from_labels(&record.answer_set)
        .map_err(|e| Failure::new("vocabulary", format!("record `{}`: {e}", record.id)))
}

fn convert(
    dataset: DatasetKind,
    annotations: &Path,
    vocab: &Path,
    template: Option<&Path>,
    out: &Path,
    failures: Option<&Path>,
) -> Result<()> {
    let rows: Vec<AnnotationRow> = read_jsonl(annotations)?;
    let vocab: Vocabulary = read_json(vocab)?;
    let template = match template {
        Some(p) => read_text(p)?,
        None => DEFAULT_QA_TEMPLATE.to_string(),
    };
    let outcome = convert_annotations(&rows, &vocab, &template, dataset).map_err(|e| Failure::new("convert", e))?;
    write_jsonl(out, &outcome.records)?;
    if let Some(path) = failures {
        write_jsonl(path, &outcome.failures)?;
    }
    println!(
        "converted {} of {} frames ({} failed)",
        outcome.records.len(),
        rows.len(),
        outcome.failures.len()
    );
    Ok(())
}

fn coldstart_manifest(images: &Path, ratios: &[f64], seed: u64, templates: Option<&Path>, out: &Path) -> Result<()> {
    let images: Vec<ImageEntry> = read_jsonl(images)?;
    let pools: TemplatePools = match templates {
        Some(p) => read_json(p)?,
        None => TemplatePools::default(),
    };
    let ratios: [f64; 3] = ratios
        .try_into()
        .map_err(|_| Failure::new("ratios", "--ratios takes exactly three values"))?;
    let manifest = build_cold_start_manifest(&images, ratios, seed, &pools).map_err(|e| Failure::new("manifest", e))?;
    write_jsonl(out, &manifest)?;
    println!("wrote {} manifest entries", manifest.len());
    Ok(())
}

#[derive(Deserialize)]
struct ResponseRow {
    #[serde(default)]
    id: Option<String>,
    response: String,
}

fn coldstart_import(manifest: &Path, responses: &Path, out: &Path, json: bool) -> Result<()> {
    let manifest: Vec<ColdStartRecord> = read_jsonl(manifest)?;
    let rows: Vec<ResponseRow> = read_jsonl(responses)?;
    let pairs = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| (r.id.unwrap_or_else(|| format!("line-{}", i + 1)), r.response))
        .collect::<Vec<_>>();
    let report = import_cold_start_responses(&manifest, &pairs).map_err(|e| Failure::new("import", e))?;
    write_jsonl(out, &report.records)?;
    if json {
        for r in &report.rejects {
            println!("{}", to_json_line(r));
        }
    } else {
        for r in &report.rejects {
            println!("rejected {}: {}", r.id, describe(&r.report));
        }
        println!(
            "accepted {}, rejected {}, orphans {}",
            report.accepted,
            report.rejects.len(),
            report.orphans.len()
        );
    }
    Ok(())
}

fn describe(report: &format::FormatReport) -> String {
    report
        .violations
        .iter()
        .map(|v| format!("{:?} at {}..{} ({})", v.code, v.span.start, v.span.end, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

/// A JSONL file whose every non-blank line is an object with a string
/// `response` field is treated as many responses; anything else is one.
fn split_responses(text: &str) -> Vec<(String, String)> {
    let rows: Option<Vec<ResponseRow>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).ok())
        .collect();
    match rows {
        Some(rows) if !rows.is_empty() => rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| (r.id.unwrap_or_else(|| format!("line-{}", i + 1)), r.response))
            .collect(),
        _ => vec![("input".to_string(), text.to_string())],
    }
}

fn validate(mode: FormatMode, input: &Path, json: bool) -> Result<()> {
    let text = read_text(input)?;
    let mut invalid = Vec::new();
    let mut out = io::stdout().lock();
    for (id, response) in split_responses(&text) {
        let report = format::validate(&response, mode);
        if json {
            let line = json!({"id": id, "valid": report.valid, "violations": report.violations});
            writeln!(out, "{line}").ok();
        } else if report.valid {
            writeln!(out, "{id}: valid").ok();
        } else {
            writeln!(out, "{id}: invalid: {}", describe(&report)).ok();
        }
        if !report.valid {
            invalid.push(id);
        }
    }
    if invalid.is_empty() {
        Ok(())
    } else {
        Err(Failure::new("invalid_format", format!("{} response(s) failed validation", invalid.len()))
            .with(json!({ "ids": invalid })))
    }
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    id: &'a str,
    reward: f64,
    format_valid: bool,
    pred_entities: Vec<&'a str>,
}

fn score(spec: &Path, input: &Path, truth: &Path, out: &Path) -> Result<()> {
    let cfg = RunConfig::from_toml(&read_text(spec)?).map_err(|e| Failure::new("config", e))?;
    let responses: Vec<ResponseRow> = read_jsonl(input)?;
    let truth: Vec<QaRecord> = read_jsonl(truth)?;
    let vocab = load_vocabulary(cfg.data.vocab.as_deref().map(Path::new), &truth)?;
    let index = truth_index(&truth)?;
    let missing: Vec<String> = responses
        .iter()
        .filter_map(|r| match &r.id {
            Some(id) if index.contains_key(id.as_str()) => None,
            Some(id) => Some(id.clone()),
            None => Some(String::new()),
        })
        .collect();
    if !missing.is_empty() {
        return Err(Failure::new("missing_ids", format!("{} response(s) have no ground truth", missing.len()))
            .with(json!({ "missing": missing })));
    }
    let reward = RewardSpec::new(vocab.clone(), cfg.reward.task_metric, cfg.reward.format_mode);
    let mut lines = Vec::with_capacity(responses.len());
    for r in &responses {
        let id = r.id.as_deref().expect("checked above");
        let gt = ground_truth(&vocab, index[id])?;
        let scored = reward.score(&r.response, &gt).map_err(|e| Failure::new("reward", e))?;
        lines.push(to_json_line(&ScoreRow {
            id,
            reward: scored.reward,
            format_valid: scored.format_valid,
            pred_entities: vocab.labels(&scored.pred).collect(),
        }));
    }
    write_lines(out, &lines)
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

#[derive(Serialize)]
struct SftStep {
    step: usize,
    epoch: usize,
    mean_nll: f64,
}

fn reference_choice(policy: &PolicyParams, vocab: &Vocabulary, record: &QaRecord) -> Result<Choice> {
    let gt = ground_truth(vocab, record)?;
    match policy.kind() {
        PolicyKind::SubsetBernoulli => Ok(Choice::Subset(gt)),
        PolicyKind::CategoricalSequence => {
            if gt.len() != policy.positions() {
                return Err(Failure::new(
                    "sft_reference",
                    format!(
                        "record `{}` has {} answers but the sequence policy has {} positions",
                        record.id,
                        gt.len(),
                        policy.positions()
                    ),
                ));
            }
            Ok(Choice::Sequence(gt.iter().collect()))
        }
    }
}

fn train_toy(config: &Path, data_path: &Path, out: &Path) -> Result<()> {
    let seed_override = RunConfig::seed_from_env().map_err(|e| Failure::new("config", e))?;
    let mut cfg = RunConfig::from_toml(&read_text(config)?)
        .and_then(|c| c.resolve(seed_override))
        .map_err(|e| Failure::new("config", e))?;
    cfg.run.output_dir = Some(out.display().to_string());

    let mut records: Vec<QaRecord> = read_jsonl(data_path)?;
    for r in &records {
        r.validate(cfg.data.dataset).map_err(|e| Failure::new("dataset", e))?;
    }
    if let Some(split) = &cfg.data.split {
        records = sample_split(&records, split).map_err(|e| Failure::new("split", e))?.train;
    }
    let vocab = load_vocabulary(cfg.data.vocab.as_deref().map(Path::new), &records)?;
    let policy = match cfg.run.policy {
        PolicyKind::SubsetBernoulli => PolicyParams::subset_bernoulli(vocab.clone()),
        PolicyKind::CategoricalSequence => PolicyParams::categorical_sequence(vocab.clone(), cfg.run.positions),
    };

    let (log, params) = match cfg.run.mode {
        RunMode::Rlvr => {
            let spec = RewardSpec::new(vocab, cfg.reward.task_metric, cfg.reward.format_mode);
            let mut trainer = GrpoTrainer::new(policy, spec, cfg.grpo.clone())
                .map_err(|e| Failure::new("config", e))?
                .with_render_mode(cfg.reward.effective_render_mode());
            let log: TrainLog = trainer.run(&records).map_err(|e| Failure::new("training", e))?;
            (log.to_jsonl(), trainer.into_policy())
        }
        RunMode::Sft => run_sft(&cfg, policy, &vocab, &records)?,
    };

    fs::create_dir_all(out).map_err(io_err(out))?;
    write_file(&out.join("trainlog.jsonl"), log.as_bytes())?;
    let params_json = serde_json::to_string_pretty(&params.to_file()).expect("serializable");
    write_file(&out.join("params_final.json"), format!("{params_json}\n").as_bytes())?;
    let cfg_json = serde_json::to_string_pretty(&cfg).expect("serializable");
    write_file(&out.join("config_resolved.json"), format!("{cfg_json}\n").as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run_sft(cfg: &RunConfig, mut policy: PolicyParams, vocab: &Vocabulary, records: &[QaRecord]) -> Result<(String, PolicyParams)> {
    if records.is_empty() {
        return Err(Failure::new("empty_input", "no QA records"));
    }
    let references = records
        .iter()
        .map(|r| reference_choice(&policy, vocab, r))
        .collect::<Result<Vec<_>>>()?;
    let seeds = SeedTree::new(cfg.run.seed);
    let mut log = String::new();
    let mut step = 0;
    'epochs: for epoch in 0..cfg.run.sft_epochs {
        let order = shuffled_indices(records.len(), &mut seeds.stream("sft-shuffle", epoch as u64));
        for chunk in order.chunks(cfg.grpo.batch_size_prompts) {
            if cfg.grpo.max_steps.is_some_and(|m| step >= m) {
                break 'epochs;
            }
            let batch: Vec<Choice> = chunk.iter().map(|&i| references[i].clone()).collect();
            let mean_nll = sft_batch_step(&mut policy, &batch, cfg.run.sft_learning_rate)
                .map_err(|e| Failure::new("training", e))?;
            log.push_str(&to_json_line(&SftStep { step, epoch, mean_nll }));
            log.push('\n');
            step += 1;
        }
    }
    Ok((log, policy))
}

#[derive(Deserialize)]
struct PredRow {
    id: String,
    #[serde(default)]
    pred_entities: Option<Vec<String>>,
    #[serde(default)]
    response: Option<String>,
}

#[allow(clippy::too_many_arguments)]
fn eval(
    pred: &Path,
    truth: &Path,
    vocab: Option<&Path>,
    gate: GateMode,
    opts: EvalOptions,
    out: &Path,
    per_class_csv: Option<&Path>,
    json: bool,
) -> Result<()> {
    let preds: Vec<PredRow> = read_jsonl(pred)?;
    let truth: Vec<QaRecord> = read_jsonl(truth)?;
    let vocab = load_vocabulary(vocab, &truth)?;
    let index = truth_index(&truth)?;

    let mut seen = BTreeSet::new();
    for p in &preds {
        if !seen.insert(p.id.as_str()) {
            return Err(Failure::new("duplicate_id", format!("duplicate prediction id `{}`", p.id)));
        }
    }
    let missing_truth: Vec<&str> = seen.iter().copied().filter(|id| !index.contains_key(id)).collect();
    let missing_pred: Vec<&str> = index.keys().copied().filter(|id| !seen.contains(id)).collect();
    if !missing_truth.is_empty() || !missing_pred.is_empty() {
        return Err(Failure::new(
            "missing_ids",
            format!(
                "{} prediction(s) without truth, {} truth record(s) without prediction",
                missing_truth.len(),
                missing_pred.len()
            ),
        )
        .with(json!({ "missing_truth": missing_truth, "missing_pred": missing_pred })));
    }

    let mut records = Vec::with_capacity(preds.len());
    for p in &preds {
        let predicted = match (&p.pred_entities, &p.response) {
            (Some(labels), _) => vocab
                .set_from_labels(labels)
                .map_err(|e| Failure::new("vocabulary", format!("prediction `{}`: {e}", p.id)))?,
            (None, Some(text)) => match gate.format_mode() {
                None => extract_entities(text, &vocab),
                Some(mode) => match format::extract_answer(text, mode) {
                    Ok(answer) => extract_entities(&answer, &vocab),
                    Err(_) => vocab.empty_set(),
                },
            },
            (None, None) => {
                return Err(Failure::new(
                    "parse",
                    format!("prediction `{}` has neither pred_entities nor response", p.id),
                ))
            }
        };
        records.push(EvalRecord {
            id: p.id.clone(),
            pred: predicted,
            gt: ground_truth(&vocab, index[p.id.as_str()])?,
        });
    }
    let report = metrics::aggregate_report(&records, &vocab, opts).map_err(|e| Failure::new("metrics", e))?;
    let report_json = serde_json::to_string_pretty(&report).expect("serializable");
    write_file(out, format!("{report_json}\n").as_bytes())?;
    if let Some(csv) = per_class_csv {
        write_file(csv, metrics::per_class_csv(&report).as_bytes())?;
    }
    if json {
        println!(
            "{}",
            json!({"n": report.n, "precision": report.precision, "recall": report.recall, "f1": report.f1, "f1_cls": report.f1_cls})
        );
    } else {
        println!(
            "n={} precision={:.4} recall={:.4} f1={:.4} f1_cls={:.4}",
            report.n, report.precision, report.recall, report.f1, report.f1_cls
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new("threads", e))?;
    }
    match cli.command {
        Command::Convert {
            dataset,
            annotations,
            vocab,
            template,
            out,
            failures,
        } => convert(dataset, &annotations, &vocab, template.as_deref(), &out, failures.as_deref()),
        Command::ColdstartManifest {
            images,
            ratios,
            seed,
            templates,
            out,
        } => coldstart_manifest(&images, &ratios, seed, templates.as_deref(), &out),
        Command::ColdstartImport {
            manifest,
            responses,
            out,
            json,
        } => coldstart_import(&manifest, &responses, &out, json),
        Command::Validate { mode, input, json } => validate(mode.into(), &input, json),
        Command::Score {
            spec,
            input,
            truth,
            out,
        } => score(&spec, &input, &truth, &out),
        Command::TrainToy { config, data, out } => train_toy(&config, &data, &out),
        Command::Eval {
            pred,
            truth,
            vocab,
            mode,
            averaging,
            class_scope,
            out,
            per_class_csv,
            json,
        } => {
            let opts = EvalOptions {
                averaging: match averaging {
                    AveragingArg::Example => Averaging::Example,
                    AveragingArg::Micro => Averaging::Micro,
                },
                class_scope: match class_scope {
                    ScopeArg::Present => ClassScope::Present,
                    ScopeArg::FullVocabulary => ClassScope::FullVocabulary,
                },
            };
            eval(&pred, &truth, vocab.as_deref(), mode.into(), opts, &out, per_class_csv.as_deref(), json)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let mut obj = json!({"error": f.kind, "message": f.message});
            if !f.details.is_null() {
                obj["details"] = f.details;
            }
            eprintln!("{obj}");
            ExitCode::from(1)
        }
    }
}
