//! The `specter` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{emit_entropy_csv, entropy_rate, feature_dump_csv};
use crate::corpus::{load_dataset, split_dataset, tokenize, Dataset, DatasetFormat, Document, Label, Split, TokenSequence};
use crate::detector::{fit_detector, score_documents, DetectorArtifact, DetectorConfig, SelectionStrategy};
use crate::error::{Error, Result};
use crate::eval::{length_sweep, load_plans, report_csv, run_plans, spearman, DEFAULT_LENGTHS};
use crate::features::{enumerate_features, parse_feature, FeatureExpr};
use crate::ngram::{NgramModel, DEFAULT_DELTA, DEFAULT_UNIFORM_WEIGHT};
use crate::perturb::{curve_csv, perturb, robustness_sweep, PerturbContext, Perturbation, PerturbationKind, SynonymLexicon};
use crate::providers::{
    parse_provider_list, perplexity_of, CompletionsClient, Endpoint, ProbabilityCache, ProbabilityVector, ProviderId,
    ProviderSet, RetryPolicy,
};

pub const ENV_API_KEY: &str = "SPECTER_API_KEY";
pub const ENV_API_BASE: &str = "SPECTER_API_BASE";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerMode {
    /// The first neural provider's tokenization, else the reference one.
    #[default]
    Auto,
    /// Always the reference tokenizer; rejects neural providers.
    Reference,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralConfig {
    /// Model name sent to the completions endpoint.
    pub model: String,
    #[serde(default)]
    pub base_url: Option<String>,
}

/// Settings shared by every subcommand. Values come from the `--config`
/// file, then command-line flags, then the environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub unigram_model: Option<PathBuf>,
    pub trigram_model: Option<PathBuf>,
    /// Neural providers by alias (`neural:<alias>`).
    pub neural: BTreeMap<String, NeuralConfig>,
    pub api_base: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub requests_per_second: f64,
    pub tokenizer: TokenizerMode,
    pub delta: f64,
    pub uniform_weight: f64,
    pub c: f64,
    pub depth: usize,
    pub max_k: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub split: (f64, f64, f64),
}

impl Default for Config {
    fn default() -> Self {
        let d = DetectorConfig::default();
        Self {
            unigram_model: None,
            trigram_model: None,
            neural: BTreeMap::new(),
            api_base: None,
            cache_dir: None,
            requests_per_second: 1.0,
            tokenizer: TokenizerMode::Auto,
            delta: DEFAULT_DELTA,
            uniform_weight: DEFAULT_UNIFORM_WEIGHT,
            c: d.c,
            depth: d.depth,
            max_k: d.max_k,
            epsilon: d.epsilon,
            seed: 0,
            split: (0.8, 0.1, 0.1),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "specter", version, about = "Detect machine-generated text with weak language-model features")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train or apply n-gram models.
    #[command(subcommand)]
    Ngram(NgramCommand),
    /// Score a dataset with every provider and write cache records.
    Score(ScoreArgs),
    /// Work with structured feature expressions.
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Train a detector.
    Train(TrainArgs),
    /// Classify one document.
    Classify(ClassifyArgs),
    /// Run experiment plans or a document-length sweep.
    Eval(EvalArgs),
    /// Perturb stdin and write the result to stdout.
    Perturb(PerturbArgs),
    /// Measure a detector under increasing perturbation.
    Robustness(RobustnessArgs),
    /// Entropy-rate curves and feature value dumps.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Debug, Args, Default)]
pub struct ProviderArgs {
    /// Unigram model file.
    #[arg(long)]
    pub unigram_model: Option<PathBuf>,
    /// Trigram model file.
    #[arg(long)]
    pub trigram_model: Option<PathBuf>,
    /// Directory of cached provider records.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset (JSONL file or a directory with one folder per label).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Seed for the train/val/test split when the dataset carries none.
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum NgramCommand {
    /// Train a model on a text corpus (blank-line separated paragraphs).
    Train {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(["1", "3"]))]
        order: String,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        uniform_weight: Option<f64>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the perplexity of a text file under a model.
    Perplexity {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Comma-separated providers, e.g. `unigram,trigram,neural:davinci`.
    #[arg(long)]
    pub providers: String,
    #[command(flatten)]
    pub models: ProviderArgs,
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum FeaturesCommand {
    /// List every feature up to a search depth, one per line.
    Enumerate {
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        providers: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value = "unigram,trigram")]
    pub providers: String,
    #[command(flatten)]
    pub models: ProviderArgs,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub max_k: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Inverse regularization strength.
    #[arg(long = "c")]
    pub c: Option<f64>,
    /// Leave out the handcrafted features.
    #[arg(long)]
    pub no_handcrafted: bool,
    /// `forward`, `random` (k = max_k) or `none`.
    #[arg(long, default_value = "forward")]
    pub strategy: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Text file; `-` reads stdin.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub models: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Experiment plans (JSON list).
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub plan: Option<PathBuf>,
    /// Trained detector for a length sweep over the test split.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Sweep lengths in tokens.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    #[arg(long, default_value = "unigram,trigram")]
    pub providers: String,
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub models: ProviderArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Synonym file for `synonym_replace`.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Shell command for `external_transform`.
    #[arg(long)]
    pub command: Option<String>,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub kind: String,
    #[arg(long, value_delimiter = ',')]
    pub counts: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Use every test document instead of only the ai-labeled ones.
    #[arg(long)]
    pub all_labels: bool,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub command: Option<String>,
    #[command(flatten)]
    pub models: ProviderArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Mean log-probability by token position.
    Entropy {
        #[arg(long)]
        provider: String,
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 1000)]
        max_positions: usize,
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        models: ProviderArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Raw feature values for every document.
    Features {
        /// Feature file, one expression per line.
        #[arg(long)]
        features: PathBuf,
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        models: ProviderArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `argv` (program name first) and runs it. Returns the exit code:
/// 0 on success, 1 for usage errors, 2 for runtime errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    if let Some(jobs) = cli.jobs {
        crate::par::set_jobs(jobs);
    }
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn execute(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Ngram(cmd) => ngram(cmd, &config),
        Command::Score(args) => score(args, &config),
        Command::Features(FeaturesCommand::Enumerate { depth, providers, out }) => {
            let providers = parse_provider_list(&providers)?;
            let features = enumerate_features(&providers, depth.unwrap_or(config.depth))?;
            log::info!("{} features", features.len());
            let text: String = features.iter().map(|f| format!("{f}\n")).collect();
            write_output(out.as_deref(), &text)
        }
        Command::Train(args) => train(args, &config),
        Command::Classify(args) => classify(args, &config),
        Command::Eval(args) => eval(args, &config),
        Command::Perturb(args) => perturb_stdin(args),
        Command::Robustness(args) => robustness(args, &config),
        Command::Analyze(cmd) => analyze(cmd, &config),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_corpus(path: &Path) -> Result<Vec<TokenSequence>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .split("\n\n")
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(tokenize)
        .collect())
}

fn ngram(cmd: NgramCommand, config: &Config) -> Result<()> {
    match cmd {
        NgramCommand::Train {
            order,
            delta,
            uniform_weight,
            corpus,
            out,
        } => {
            let order: u8 = order.parse().expect("validated by clap");
            let seqs = read_corpus(&corpus)?;
            let model = NgramModel::train(
                order,
                &seqs,
                delta.unwrap_or(config.delta),
                uniform_weight.unwrap_or(config.uniform_weight),
            )?;
            model.save(&out)?;
            log::info!("trained order-{order} model with {} types", model.vocab().len());
            Ok(())
        }
        NgramCommand::Perplexity { model, input } => {
            let model = NgramModel::load(&model)?;
            let text = fs::read_to_string(input)?;
            let probs = model.score(&tokenize(&text));
            println!("{}", perplexity_of(&probs)?);
            Ok(())
        }
    }
}

fn load_data(args: &DatasetArgs, config: &Config) -> Result<Dataset> {
    let format = if args.dataset.is_dir() {
        DatasetFormat::DirOfTxt
    } else {
        DatasetFormat::Jsonl
    };
    let dataset = load_dataset(&args.dataset, format)?;
    if dataset.splits.is_empty() {
        split_dataset(dataset, config.split, args.split_seed.unwrap_or(config.seed))
    } else {
        Ok(dataset)
    }
}

/// Builds the provider set, preferring flags over the config file and the
/// environment over both for the endpoint settings.
fn build_providers(ids: &[ProviderId], flags: &ProviderArgs, config: &Config, pinned: &BTreeMap<ProviderId, PathBuf>) -> Result<ProviderSet> {
    if config.tokenizer == TokenizerMode::Reference && ids.iter().any(ProviderId::is_neural) {
        return Err(Error::Config("the reference tokenizer mode excludes neural providers".into()));
    }
    let mut set = ProviderSet::new();
    if let Some(dir) = flags.cache.as_ref().or(config.cache_dir.as_ref()) {
        set = set.with_cache(ProbabilityCache::new(dir)?);
    }
    let env_base = std::env::var(ENV_API_BASE).ok();
    let api_key = std::env::var(ENV_API_KEY).ok();
    for id in ids {
        set = match id {
            ProviderId::Unigram | ProviderId::Trigram => {
                let (flag, conf) = match id {
                    ProviderId::Unigram => (&flags.unigram_model, &config.unigram_model),
                    _ => (&flags.trigram_model, &config.trigram_model),
                };
                let path = flag
                    .clone()
                    .or_else(|| conf.clone())
                    .or_else(|| pinned.get(id).cloned())
                    .ok_or_else(|| Error::Config(format!("no model file given for provider {id}")))?;
                let model = NgramModel::load(&path)?;
                set.with_ngram(id.clone(), Arc::new(model))?
                    .with_model_path(id, path.display().to_string())
            }
            ProviderId::Neural(alias) => {
                let neural = config.neural.get(alias);
                let base = env_base
                    .clone()
                    .or_else(|| neural.and_then(|n| n.base_url.clone()))
                    .or_else(|| config.api_base.clone());
                match (base, neural) {
                    (Some(base_url), Some(n)) => {
                        let endpoint = Endpoint {
                            base_url,
                            api_key: api_key.clone(),
                            model: n.model.clone(),
                        };
                        let client = CompletionsClient::new(endpoint, RetryPolicy::default(), config.requests_per_second);
                        set.with_neural(id.clone(), Box::new(client))?
                    }
                    // Without an endpoint the provider is served from the cache only.
                    _ => set.with_cached_only(id.clone())?,
                }
            }
        };
    }
    Ok(set)
}

fn score(args: ScoreArgs, config: &Config) -> Result<()> {
    let ids = parse_provider_list(&args.providers)?;
    let set = build_providers(&ids, &args.models, config, &BTreeMap::new())?;
    if set.cache().is_none() {
        return Err(Error::Config("score needs --cache or cache_dir".into()));
    }
    let format = if args.dataset.is_dir() {
        DatasetFormat::DirOfTxt
    } else {
        DatasetFormat::Jsonl
    };
    let dataset = load_dataset(&args.dataset, format)?;
    let mut out = String::new();
    for doc in &dataset.documents {
        for path in set.record(doc)? {
            out.push_str(&format!("{}\t{}\n", doc.id, path.display()));
        }
    }
    write_output(None, &out)
}

fn detector_config(args: &TrainArgs, config: &Config) -> Result<DetectorConfig> {
    let providers = parse_provider_list(&args.providers)?;
    let max_k = args.max_k.unwrap_or(config.max_k);
    let strategy = match args.strategy.as_str() {
        "forward" => SelectionStrategy::Forward,
        "random" => SelectionStrategy::Random { k: max_k },
        "none" => SelectionStrategy::None,
        other => return Err(Error::Config(format!("unknown strategy {other:?}"))),
    };
    Ok(DetectorConfig {
        providers,
        depth: args.depth.unwrap_or(config.depth),
        max_k,
        epsilon: args.epsilon.unwrap_or(config.epsilon),
        c: args.c.unwrap_or(config.c),
        handcrafted: !args.no_handcrafted,
        strategy,
        seed: config.seed,
        ..DetectorConfig::default()
    })
}

fn train(args: TrainArgs, config: &Config) -> Result<()> {
    let detector = detector_config(&args, config)?;
    let dataset = load_data(&args.data, config)?;
    let set = build_providers(&detector.providers, &args.models, config, &BTreeMap::new())?;
    let artifact = fit_detector(&dataset, &set, &detector)?;
    for (f, s) in artifact.features.iter().zip(&artifact.selection_val_f1) {
        log::info!("selected {f} (val F1 {s:.4})");
    }
    artifact.save(&args.out)
}

/// The provider set an artifact was trained with, models located by flag,
/// config, or the path recorded in the artifact.
fn artifact_providers(artifact: &DetectorArtifact, flags: &ProviderArgs, config: &Config) -> Result<ProviderSet> {
    let pinned: BTreeMap<ProviderId, PathBuf> = artifact
        .providers
        .iter()
        .filter_map(|p| p.model_path.as_ref().map(|m| (p.id.clone(), PathBuf::from(m))))
        .collect();
    let set = build_providers(&artifact.provider_ids(), flags, config, &pinned)?;
    artifact.check_providers(&set)?;
    Ok(set)
}

fn classify(args: ClassifyArgs, config: &Config) -> Result<()> {
    let artifact = DetectorArtifact::load(&args.model)?;
    let set = artifact_providers(&artifact, &args.models, config)?;
    let text = if args.input == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(&args.input)?
    };
    let doc = Document::new(args.input.display().to_string(), text, Label::Unlabeled);
    let result = artifact.classify(&set, &doc)?;
    if args.json {
        println!("{}", serde_json::to_string(&result)?);
    } else {
        println!("{}\t{:.6}", result.label.as_str(), result.score);
    }
    Ok(())
}

fn eval(args: EvalArgs, config: &Config) -> Result<()> {
    let dataset = load_data(&args.data, config)?;
    if let Some(plan) = &args.plan {
        let plans = load_plans(plan)?;
        let mut ids: Vec<ProviderId> = parse_provider_list(&args.providers)?;
        for p in &plans {
            if let crate::eval::Method::Detector { config: c } = &p.method {
                for id in &c.providers {
                    if !ids.contains(id) {
                        ids.push(id.clone());
                    }
                }
            }
        }
        let set = build_providers(&ids, &args.models, config, &BTreeMap::new())?;
        let rows = run_plans(&plans, &dataset, &set)?;
        fs::write(&args.out, report_csv(&rows))?;
        let json: BTreeMap<&str, &crate::eval::MetricReport> = rows.iter().map(|(k, v)| (k.as_str(), v)).collect();
        fs::write(args.out.with_extension("json"), serde_json::to_string_pretty(&json)?)?;
        return Ok(());
    }
    let model = args.model.as_ref().expect("clap requires --plan or --model");
    let artifact = DetectorArtifact::load(model)?;
    let set = artifact_providers(&artifact, &args.models, config)?;
    let docs: Vec<&Document> = dataset.in_split(Split::Test).filter(|d| d.label.is_labeled()).collect();
    let lengths = args.lengths.clone().unwrap_or_else(|| DEFAULT_LENGTHS.to_vec());
    let sweep = length_sweep(&artifact, &set, &docs, &lengths)?;
    let rows: Vec<(String, crate::eval::MetricReport)> = sweep.iter().map(|(n, r)| (n.to_string(), r.clone())).collect();
    let ns: Vec<f64> = sweep.iter().map(|(n, _)| *n as f64).collect();
    let f1: Vec<f64> = sweep.iter().map(|(_, r)| r.f1).collect();
    log::info!("spearman(N, F1) = {:.4}", spearman(&ns, &f1));
    fs::write(&args.out, report_csv(&rows))
        .map_err(Error::from)
}

fn perturb_stdin(args: PerturbArgs) -> Result<()> {
    let kind: PerturbationKind = args.kind.parse()?;
    let lexicon = args.lexicon.as_deref().map(SynonymLexicon::load).transpose()?;
    let ctx = PerturbContext {
        lexicon: lexicon.as_ref(),
        command: args.command.as_deref(),
    };
    let mut text = String::new();
    std::io::stdin().read_to_string(&mut text)?;
    let p = Perturbation {
        kind,
        count: args.count,
        seed: args.seed,
    };
    write_output(None, &perturb(&text, &p, &ctx)?)
}

fn robustness(args: RobustnessArgs, config: &Config) -> Result<()> {
    let kind: PerturbationKind = args.kind.parse()?;
    if args.counts.is_empty() {
        return Err(Error::Config("--counts is empty".into()));
    }
    let artifact = DetectorArtifact::load(&args.model)?;
    let set = artifact_providers(&artifact, &args.models, config)?;
    let dataset = load_data(&args.data, config)?;
    let docs: Vec<&Document> = dataset
        .in_split(Split::Test)
        .filter(|d| if args.all_labels { d.label.is_labeled() } else { d.label == Label::Ai })
        .collect();
    let lexicon = args.lexicon.as_deref().map(SynonymLexicon::load).transpose()?;
    let ctx = PerturbContext {
        lexicon: lexicon.as_ref(),
        command: args.command.as_deref(),
    };
    let curve = robustness_sweep(&artifact, &set, &docs, kind, &args.counts, &args.seeds, &ctx)?;
    fs::write(&args.out, curve_csv(&curve))?;
    Ok(())
}

fn analyze(cmd: AnalyzeCommand, config: &Config) -> Result<()> {
    match cmd {
        AnalyzeCommand::Entropy {
            provider,
            class,
            max_positions,
            data,
            models,
            out,
        } => {
            let provider: ProviderId = provider.parse()?;
            let class: Label = class.parse()?;
            let dataset = load_data(&data, config)?;
            let set = build_providers(&[provider.clone()], &models, config, &BTreeMap::new())?;
            let docs: Vec<&Document> = dataset.documents.iter().filter(|d| d.label == class).collect();
            let scored = score_documents(&set, &docs)?;
            let vectors: Vec<ProbabilityVector> = scored
                .into_iter()
                .zip(&docs)
                .map(|(mut s, d)| {
                    let mut v = s.scored.vectors.remove(&provider).expect("scored by every provider");
                    v.doc_id = d.id.clone();
                    v
                })
                .collect();
            let series = entropy_rate(&vectors, class, max_positions)?;
            emit_entropy_csv(&[series], &out)
        }
        AnalyzeCommand::Features {
            features,
            data,
            models,
            out,
        } => {
            let exprs: Vec<FeatureExpr> = fs::read_to_string(&features)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| parse_feature(l.trim()))
                .collect::<Result<_>>()?;
            let mut ids: Vec<ProviderId> = Vec::new();
            for id in exprs.iter().flat_map(|e| e.providers()) {
                if !ids.contains(id) {
                    ids.push(id.clone());
                }
            }
            let dataset = load_data(&data, config)?;
            let set = build_providers(&ids, &models, config, &BTreeMap::new())?;
            let docs: Vec<&Document> = dataset.documents.iter().collect();
            let scored = score_documents(&set, &docs)?;
            let names: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
            fs::write(out, feature_dump_csv(&exprs, &names, &scored)?)?;
            Ok(())
        }
    }
}
