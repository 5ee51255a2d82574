//! Command-line front end: evaluation pipelines over JSONL corpora and
//! prediction files.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use statesum::baselines::{greedy_oracle, lead_k};
use statesum::codec::{
    decode_joint_output, encode_joint_target, parse_state, serialize_state, state_match_accuracy,
};
use statesum::corpus::{corpus_stats, load_corpus, load_predictions, to_canonical_line};
use statesum::extract::extract_tuples;
use statesum::ontology::load_ontology;
use statesum::perturb::{derive_seed, inject_noise, make_da_splits, noisy_accuracy, NoiseSpec, OperationMix};
use statesum::report::{
    build_report, evaluate_sample, pair_predictions, Conventions, EvalOptions, ReportConfig,
    StateChannel, SCHEMA_VERSION,
};
use statesum::{StateTuple, Tokenizer};

#[derive(Parser)]
#[command(
    name = "statesum",
    version,
    about = "Evaluation toolkit for task-oriented dialogue summarization",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions with ROUGE, factual P/R/F1, and error types
    Evaluate(EvaluateArgs),
    /// Score predictions with ROUGE-1/2/L only
    Rouge(RougeArgs),
    /// Dump ontology-driven tuple extraction for each input summary
    Extract(ExtractArgs),
    /// Convert between state representations and score supplied states
    #[command(subcommand)]
    Codec(CodecCommand),
    /// Write extractive baseline predictions (lead-3 or greedy oracle)
    Baseline(BaselineArgs),
    /// Perturb gold dialogue states to a target tuple-level accuracy
    Noise(NoiseArgs),
    /// Build domain-adaptation splits from single-domain dialogues
    SplitDa(SplitDaArgs),
    /// Report corpus statistics
    Stats(StatsArgs),
}

#[derive(Args)]
struct TokenizerArgs {
    /// Keep the original casing instead of lowercasing
    #[arg(long, global = true)]
    no_lowercase: bool,
    /// Keep leading and trailing punctuation on tokens
    #[arg(long, global = true)]
    keep_punctuation: bool,
    /// Fold digit words onto digits ("four" -> "4") while tokenizing
    #[arg(long, global = true)]
    fold_digit_words: bool,
}

impl TokenizerArgs {
    fn tokenizer(&self) -> Tokenizer {
        Tokenizer {
            lowercase: !self.no_lowercase,
            strip_punctuation: !self.keep_punctuation,
            fold_digit_words: self.fold_digit_words,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Extract,
    PredFile,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Gold corpus (JSONL)
    #[arg(long)]
    gold: PathBuf,
    /// Prediction file (JSONL with id and summary)
    #[arg(long)]
    predictions: PathBuf,
    /// Ontology (JSON)
    #[arg(long)]
    ontology: PathBuf,
    /// Source of the hypothesis state for factual scoring
    #[arg(long, value_enum, default_value = "extract")]
    state_channel: ChannelArg,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write per-sample scores as JSONL
    #[arg(long)]
    per_sample: Option<PathBuf>,
    /// Worker threads for per-sample scoring
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
}

#[derive(Args)]
struct RougeArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long)]
    per_sample: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
}

#[derive(Args)]
struct ExtractArgs {
    /// JSONL with id and summary fields (corpus or prediction file)
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CodecCommand {
    /// Corpus -> flat state strings ({id, state})
    Serialize(CodecIoArgs),
    /// Flat state strings ({id, state}) -> tuple records
    Parse(CodecIoArgs),
    /// Labeled corpus -> joint decoder targets ({id, text})
    EncodeJoint(CodecIoArgs),
    /// Joint model outputs ({id, text}) -> state plus summary records
    DecodeJoint(CodecIoArgs),
    /// Joint set-match accuracy of predicted states against gold states
    Accuracy(CodecAccuracyArgs),
}

#[derive(Args)]
struct CodecIoArgs {
    /// Input file: a corpus for serialize/encode-joint, JSONL records
    /// otherwise
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CodecAccuracyArgs {
    #[arg(long)]
    gold: PathBuf,
    /// Prediction file with state fields
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Lead3,
    Oracle,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long, value_enum)]
    method: BaselineMethod,
    /// Utterance count for lead-k
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Output prediction file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    /// Target tuple-level accuracy in [0, 1]
    #[arg(long)]
    accuracy: f64,
    /// Delete,replace,insert weights
    #[arg(long, default_value = "1,1,1")]
    mix: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Metadata sidecar path (defaults to <out>.meta.json)
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct SplitDaArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long)]
    target_domain: String,
    /// Fraction of the target pool sampled into training
    #[arg(long, default_value_t = 0.10)]
    fewshot: f64,
    #[arg(long)]
    seed: u64,
    /// Directory for train.ids, test.ids, fewshot.ids, split.json
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
}

enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

impl From<statesum::Error> for CliError {
    fn from(e: statesum::Error) -> Self {
        CliError::Data(e.into())
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            std::process::exit(1);
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Rouge(args) => cmd_rouge(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Codec(command) => cmd_codec(command),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Noise(args) => cmd_noise(args),
        Command::SplitDa(args) => cmd_split_da(args),
        Command::Stats(args) => cmd_stats(args),
    }
}

fn write_output(path: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match path {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{content}");
            std::io::stdout().flush().context("flushing stdout")?;
            Ok(())
        }
    }
}

fn pretty_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(format!("{}\n", serde_json::to_string_pretty(value)?))
}

fn jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> anyhow::Result<String> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    Ok(out)
}

/// Lenient JSONL reader for inputs that only need a couple of fields.
fn read_jsonl_values(path: &Path) -> anyhow::Result<Vec<(usize, serde_json::Value)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: invalid JSON", path.display(), index + 1))?;
        values.push((index + 1, value));
    }
    Ok(values)
}

fn require_str(value: &serde_json::Value, field: &str, place: &str) -> anyhow::Result<String> {
    value
        .get(field)
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| anyhow!("{place}: missing string field {field:?}"))
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Data(anyhow!(e)))
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let ontology = load_ontology(&args.ontology)?;
    let gold = load_corpus(&args.gold, &ontology)?;
    let predictions = load_predictions(&args.predictions, &ontology)?;
    let channel = match args.state_channel {
        ChannelArg::Extract => StateChannel::Extract,
        ChannelArg::PredFile => StateChannel::PredFile,
    };
    let options = EvalOptions {
        state_channel: channel,
        tokenizer: args.tokenizer.tokenizer(),
    };

    let pairs = pair_predictions(&gold, &predictions)?;
    let pool = build_pool(args.workers)?;
    let samples = pool.install(|| {
        pairs
            .par_iter()
            .map(|(d, p)| evaluate_sample(d, p, &ontology, &options))
            .collect::<statesum::Result<Vec<_>>>()
    })?;

    let state_match = match channel {
        StateChannel::PredFile => {
            let hits = pairs
                .iter()
                .filter(|(d, p)| p.state.as_ref() == Some(&d.state))
                .count();
            Some(hits as f64 / pairs.len() as f64)
        }
        StateChannel::Extract => None,
    };

    let config = ReportConfig {
        gold: args.gold.display().to_string(),
        predictions: args.predictions.display().to_string(),
        ontology: args.ontology.display().to_string(),
        state_channel: channel.to_string(),
        workers: args.workers,
        tokenizer: options.tokenizer,
        conventions: Conventions::default(),
    };
    let report = build_report(&samples, state_match, config)?;

    if let Some(path) = &args.per_sample {
        write_output(Some(path), &jsonl(&samples)?)?;
    }
    write_output(args.report.as_deref(), &pretty_json(&report)?)?;
    Ok(())
}

fn cmd_rouge(args: RougeArgs) -> Result<(), CliError> {
    let ontology = load_ontology(&args.ontology)?;
    let gold = load_corpus(&args.gold, &ontology)?;
    let predictions = load_predictions(&args.predictions, &ontology)?;
    let options = EvalOptions {
        state_channel: StateChannel::Extract,
        tokenizer: args.tokenizer.tokenizer(),
    };
    let pairs = pair_predictions(&gold, &predictions)?;
    let samples = pairs
        .iter()
        .map(|(d, p)| evaluate_sample(d, p, &ontology, &options))
        .collect::<statesum::Result<Vec<_>>>()?;

    #[derive(Serialize)]
    struct RougeSample<'a> {
        id: &'a str,
        rouge1: statesum::RougeScore,
        rouge2: statesum::RougeScore,
        rouge_l: statesum::RougeScore,
    }
    if let Some(path) = &args.per_sample {
        let records: Vec<RougeSample> = samples
            .iter()
            .map(|s| RougeSample {
                id: &s.id,
                rouge1: s.rouge1,
                rouge2: s.rouge2,
                rouge_l: s.rouge_l,
            })
            .collect();
        write_output(Some(path), &jsonl(&records)?)?;
    }

    let config = ReportConfig {
        gold: args.gold.display().to_string(),
        predictions: args.predictions.display().to_string(),
        ontology: args.ontology.display().to_string(),
        state_channel: "none".into(),
        workers: 1,
        tokenizer: options.tokenizer,
        conventions: Conventions::default(),
    };
    let full = build_report(&samples, None, config)?;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "samples": full.samples,
        "rouge": full.rouge,
        "config": full.config,
    });
    write_output(args.out.as_deref(), &pretty_json(&summary)?)?;
    Ok(())
}

fn cmd_extract(args: ExtractArgs) -> Result<(), CliError> {
    let ontology = load_ontology(&args.ontology)?;
    let mut records = Vec::new();
    for (line, value) in read_jsonl_values(&args.input)? {
        let place = format!("{}:{}", args.input.display(), line);
        let id = require_str(&value, "id", &place)?;
        let summary = require_str(&value, "summary", &place)?;
        let result = extract_tuples(&summary, &ontology);
        let tuples: Vec<&StateTuple> = result.tuples.iter().collect();
        let spans: Vec<[usize; 2]> = tuples
            .iter()
            .map(|t| {
                let (start, end) = result.spans[*t];
                [start, end]
            })
            .collect();
        records.push(json!({
            "id": id,
            "tuples": tuples,
            "spans": spans,
            "unattached": result.unattached_values,
        }));
    }
    write_output(args.out.as_deref(), &jsonl(&records)?)?;
    Ok(())
}

fn cmd_codec(command: CodecCommand) -> Result<(), CliError> {
    match command {
        CodecCommand::Serialize(args) => {
            let ontology = load_ontology(&args.ontology)?;
            let corpus = load_corpus(&args.input, &ontology)?;
            let records: Vec<_> = corpus
                .iter()
                .map(|d| json!({"id": d.id, "state": serialize_state(&d.state)}))
                .collect();
            write_output(args.out.as_deref(), &jsonl(&records)?)?;
        }
        CodecCommand::Parse(args) => {
            let ontology = load_ontology(&args.ontology)?;
            let mut records = Vec::new();
            for (line, value) in read_jsonl_values(&args.input)? {
                let place = format!("{}:{}", args.input.display(), line);
                let id = require_str(&value, "id", &place)?;
                let text = require_str(&value, "state", &place)?;
                let state = parse_state(&text, &ontology)
                    .map_err(|e| anyhow!("{place}: {e}"))?;
                let tuples: Vec<&StateTuple> = state.iter().collect();
                records.push(json!({"id": id, "state": tuples}));
            }
            write_output(args.out.as_deref(), &jsonl(&records)?)?;
        }
        CodecCommand::EncodeJoint(args) => {
            let ontology = load_ontology(&args.ontology)?;
            let corpus = load_corpus(&args.input, &ontology)?;
            let mut records = Vec::new();
            for dialogue in &corpus {
                let summary = dialogue.summary.as_deref().ok_or_else(|| {
                    anyhow!("dialogue {} has no summary to encode", dialogue.id)
                })?;
                let text = encode_joint_target(&dialogue.state, summary)
                    .map_err(|e| anyhow!("dialogue {}: {e}", dialogue.id))?;
                records.push(json!({"id": dialogue.id, "text": text}));
            }
            write_output(args.out.as_deref(), &jsonl(&records)?)?;
        }
        CodecCommand::DecodeJoint(args) => {
            let ontology = load_ontology(&args.ontology)?;
            let mut records = Vec::new();
            for (line, value) in read_jsonl_values(&args.input)? {
                let place = format!("{}:{}", args.input.display(), line);
                let id = require_str(&value, "id", &place)?;
                let text = require_str(&value, "text", &place)?;
                let decoded = decode_joint_output(&text, &ontology);
                let tuples: Vec<&StateTuple> = decoded.state.iter().collect();
                records.push(json!({
                    "id": id,
                    "summary": decoded.summary,
                    "state": tuples,
                    "missing_sentinel": decoded.missing_sentinel,
                    "malformed_state": decoded.state_error,
                }));
            }
            write_output(args.out.as_deref(), &jsonl(&records)?)?;
        }
        CodecCommand::Accuracy(args) => {
            let ontology = load_ontology(&args.ontology)?;
            let gold = load_corpus(&args.gold, &ontology)?;
            let predictions = load_predictions(&args.predictions, &ontology)?;
            let pairs = pair_predictions(&gold, &predictions)?;
            let (pred_states, gold_states): (Vec<_>, Vec<_>) = pairs
                .iter()
                .map(|(d, p)| {
                    let state = p.state.clone().ok_or_else(|| {
                        anyhow!("prediction {} carries no state", p.id)
                    })?;
                    Ok::<_, anyhow::Error>((state, d.state.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .unzip();
            let accuracy = state_match_accuracy(&pred_states, &gold_states)?;
            let out = json!({
                "schema_version": SCHEMA_VERSION,
                "samples": pairs.len(),
                "state_match_accuracy": accuracy,
                "convention": "joint set match per sample",
            });
            write_output(None, &pretty_json(&out)?)?;
        }
    }
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), CliError> {
    let ontology = load_ontology(&args.ontology)?;
    let corpus = load_corpus(&args.gold, &ontology)?;
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let mut records = Vec::new();
    for dialogue in &corpus {
        let summary = match args.method {
            BaselineMethod::Lead3 => lead_k(dialogue, args.k),
            BaselineMethod::Oracle => {
                let reference = dialogue.summary.as_deref().ok_or_else(|| {
                    anyhow!("dialogue {} has no gold summary for the oracle", dialogue.id)
                })?;
                greedy_oracle(dialogue, reference)
            }
        };
        records.push(json!({
            "id": dialogue.id,
            "summary": summary.text,
            "selected": summary.selected,
        }));
    }
    write_output(Some(&args.out), &jsonl(&records)?)?;
    Ok(())
}

fn parse_mix(text: &str) -> Result<OperationMix, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    let [delete, replace, insert] = parts.as_slice() else {
        return Err(CliError::Usage(format!(
            "--mix expects three comma-separated weights, got {text:?}"
        )));
    };
    let parse = |s: &str| -> Result<f64, CliError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("bad weight {s:?} in --mix")))
    };
    Ok(OperationMix {
        delete: parse(delete)?,
        replace: parse(replace)?,
        insert: parse(insert)?,
    })
}

fn cmd_noise(args: NoiseArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&args.accuracy) {
        return Err(CliError::Usage(format!(
            "--accuracy must be in [0, 1], got {}",
            args.accuracy
        )));
    }
    let mix = parse_mix(&args.mix)?;
    let ontology = load_ontology(&args.ontology)?;
    let corpus = load_corpus(&args.corpus, &ontology)?;

    let mut noisy_corpus = Vec::with_capacity(corpus.len());
    let mut per_dialogue = Vec::with_capacity(corpus.len());
    for dialogue in &corpus {
        let spec = NoiseSpec {
            target_accuracy: args.accuracy,
            operation_mix: mix,
            seed: derive_seed(args.seed, &dialogue.id),
        };
        let noisy = inject_noise(&dialogue.state, &spec, &ontology)?;
        let realized = noisy_accuracy(&noisy, &dialogue.state);
        per_dialogue.push(json!({
            "id": dialogue.id,
            "realized_accuracy": realized,
            "gold_tuples": dialogue.state.len(),
            "noisy_tuples": noisy.len(),
        }));
        let mut perturbed = dialogue.clone();
        perturbed.state = noisy;
        perturbed.domains = perturbed.derived_domains();
        noisy_corpus.push(perturbed);
    }

    let lines: String = noisy_corpus
        .iter()
        .map(|d| format!("{}\n", to_canonical_line(d)))
        .collect();
    write_output(Some(&args.out), &lines)?;

    let mean = per_dialogue
        .iter()
        .map(|v| v["realized_accuracy"].as_f64().unwrap())
        .sum::<f64>()
        / per_dialogue.len().max(1) as f64;
    let meta_path = args
        .meta
        .unwrap_or_else(|| PathBuf::from(format!("{}.meta.json", args.out.display())));
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "target_accuracy": args.accuracy,
        "operation_mix": mix,
        "seed": args.seed,
        "accuracy_formula": "|noisy ∩ gold| / max(|noisy|, |gold|)",
        "dialogues": per_dialogue.len(),
        "realized_accuracy_mean": mean,
        "per_dialogue": per_dialogue,
    });
    write_output(Some(&meta_path), &pretty_json(&meta)?)?;
    Ok(())
}

fn cmd_split_da(args: SplitDaArgs) -> Result<(), CliError> {
    let ontology = load_ontology(&args.ontology)?;
    let corpus = load_corpus(&args.corpus, &ontology)?;
    let split = make_da_splits(&corpus, &args.target_domain, args.fewshot, args.seed)?;
    if split.fewshot_truncated {
        eprintln!(
            "warning: requested few-shot sample exceeds the target pool; took all {} dialogues",
            split.fewshot.len()
        );
    }
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let id_file = |name: &str, ids: &[String]| -> anyhow::Result<()> {
        let mut content: String = ids.iter().map(|id| format!("{id}\n")).collect();
        if content.is_empty() {
            content = String::new();
        }
        std::fs::write(args.out_dir.join(name), content)
            .with_context(|| format!("writing {name}"))
    };
    id_file("train.ids", &split.train)?;
    id_file("test.ids", &split.test)?;
    id_file("fewshot.ids", &split.fewshot)?;
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "target_domain": split.target_domain,
        "seed": split.seed,
        "fewshot_fraction": args.fewshot,
        "fewshot_truncated": split.fewshot_truncated,
        "counts": {
            "train": split.train.len(),
            "test": split.test.len(),
            "fewshot": split.fewshot.len(),
        },
    });
    write_output(Some(&args.out_dir.join("split.json")), &pretty_json(&meta)?)?;
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<(), CliError> {
    let ontology = load_ontology(&args.ontology)?;
    let corpus = load_corpus(&args.corpus, &ontology)?;
    let tokenizer = args.tokenizer.tokenizer();
    let stats = corpus_stats(&corpus, &tokenizer)?;
    let out = json!({
        "schema_version": SCHEMA_VERSION,
        "corpus": args.corpus.display().to_string(),
        "tokenizer": tokenizer,
        "stats": stats,
    });
    write_output(None, &pretty_json(&out)?)?;
    Ok(())
}
