use crate::api;
use crate::config::Config;
use crate::pipeline::{self, LabelSource};
use crate::service::{create_tasks, AnnotationService};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use movesense_core::absa::{InfusionVariant, SentimentModel, TrainConfig};
use movesense_core::clustering::{clustering_to_tsv, parse_clustering_tsv, Embeddings, DEFAULT_ITERATIONS, DEFAULT_SEED, DEFAULT_THRESHOLD};
use movesense_core::corpus::{assign_iaa_subset, cohen_kappa, load_corpus, save_corpus, split_corpus, AnnotationRecord, DatasetSplit, LabelDistribution};
use movesense_core::engine::{write_results, EngineConfig, EnginePool, EngineSession, MockEngine, ProcessTransport, Transport};
use movesense_core::extraction::VerbLexicon;
use serde::Serialize;
use std::collections::BTreeMap;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

/// Bundled synthetic verb vectors covering the bundled lexicon.
pub const BUNDLED_VECTORS: &str = include_str!("../data/verb_vectors.txt");

const DEFAULT_SPLIT_SEED: u64 = 42;
const DEFAULT_ANNOTATORS: [&str; 2] = ["annotator1", "annotator2"];

#[derive(Debug, Parser)]
#[command(name = "movesense", version, about = "Sentiment analysis of moves in chess-teaching text")]
pub struct Cli {
    /// Random seed; each command has its own default.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Settings file with `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn sentences into one annotation record per verb.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        /// Verb lexicon; the bundled one by default.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Clustering output assigning action types to lemmas.
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified 70/10/20 split of the eligible records.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Oversample training records with paraphrased copies.
    Augment {
        #[arg(long)]
        corpus: PathBuf,
        /// Only the split's training ids are oversampled.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Per-label targets such as `pos=288,neg=234,neu=200`.
        #[arg(long)]
        targets: Option<LabelDistribution>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign the inter-annotator subset, or compare two annotated corpora.
    Iaa {
        #[arg(long, required_unless_present = "compare")]
        corpus: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        annotators: Vec<String>,
        /// Share of records every annotator labels.
        #[arg(long, default_value_t = 0.2)]
        common: f64,
        /// Share each annotator labels alone; the rest is dealt evenly otherwise.
        #[arg(long)]
        specific: Option<f64>,
        /// Cohen's kappa between two annotated corpora on their shared records.
        #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "corpus")]
        compare: Option<Vec<PathBuf>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster verb lemmas and name each cluster's action type.
    Cluster {
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a sentiment classifier.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long, default_value = "move-action")]
        variant: InfusionVariant,
        #[command(flatten)]
        training: TrainingArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained classifier on one part of a split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long, value_enum, default_value_t = Part::Test)]
        part: Part,
        /// Must match the variant the model was trained with.
        #[arg(long, default_value = "move-action")]
        variant: InfusionVariant,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and test once per seed and average the test micro-F1.
    Experiment {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        /// A variant name or `all`.
        #[arg(long, default_value = "all")]
        variant: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[command(flatten)]
        training: TrainingArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare sentiment labels with engine outcomes of the moves.
    EngineCompare(EngineCompareArgs),
    /// Serve annotation tasks over HTTP.
    AnnotateServe {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[command(flatten)]
        tasks: TaskArgs,
        /// Built frontend assets to serve at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Write the corpus with the latest submitted answers applied.
    AnnotateExport {
        #[command(flatten)]
        tasks: TaskArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Part {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Labels {
    Gold,
    Predicted,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Hashed feature space size.
    #[arg(long)]
    pub dimension: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Submission log; `<corpus>.submissions.jsonl` by default.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub annotators: Vec<String>,
    #[arg(long, default_value_t = 0.2)]
    pub common: f64,
}

#[derive(Debug, Args)]
pub struct EngineCompareArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// UCI engine executable.
    #[arg(long)]
    pub engine: Option<PathBuf>,
    /// Use the built-in scripted engine instead of a real one.
    #[arg(long, conflicts_with = "engine")]
    pub mock: bool,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long)]
    pub skill: Option<u32>,
    #[arg(long)]
    pub elo: Option<u32>,
    /// Engine sessions evaluating in parallel.
    #[arg(long)]
    pub pool: Option<usize>,
    /// Share of eligible records to evaluate.
    #[arg(long, default_value_t = 0.10)]
    pub sample: f64,
    #[arg(long, value_enum, default_value_t = Labels::Gold)]
    pub labels: Labels,
    /// Classifier for `--labels predicted`.
    #[arg(long, required_if_eq("labels", "predicted"))]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "move-action")]
    pub variant: InfusionVariant,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn lexicon(path: Option<&Path>) -> Result<VerbLexicon> {
    Ok(match path {
        Some(p) => VerbLexicon::load(p)?,
        None => VerbLexicon::bundled(),
    })
}

fn train_config(args: &TrainingArgs, config: &Config, seed: u64) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        learning_rate: args.learning_rate.or(config.learning_rate).unwrap_or(d.learning_rate),
        epochs: args.epochs.or(config.epochs).unwrap_or(d.epochs),
        batch_size: args.batch_size.or(config.batch_size).unwrap_or(d.batch_size),
        dimension: args.dimension.or(config.dimension).unwrap_or(d.dimension),
        seed,
    }
}

fn split_ids(split: &DatasetSplit, part: Part) -> (&[String], &'static str) {
    match part {
        Part::Train => (&split.train, "train"),
        Part::Validation => (&split.validation, "validation"),
        Part::Test => (&split.test, "test"),
    }
}

fn annotators(flag: &[String], config: &Config) -> Vec<String> {
    if !flag.is_empty() {
        return flag.to_vec();
    }
    config
        .annotators
        .clone()
        .unwrap_or_else(|| DEFAULT_ANNOTATORS.iter().map(|s| s.to_string()).collect())
}

fn open_service(args: &TaskArgs, config: &Config, seed: u64) -> Result<AnnotationService> {
    let records = load_corpus(&args.corpus)?;
    let tasks = create_tasks(&records, args.common, &annotators(&args.annotators, config), seed)?;
    let log = args.log.clone().unwrap_or_else(|| {
        let mut p = args.corpus.clone().into_os_string();
        p.push(".submissions.jsonl");
        PathBuf::from(p)
    });
    Ok(AnnotationService::open(records, tasks, log)?)
}

fn engine_pool(args: &EngineCompareArgs, config: &Config) -> Result<EnginePool> {
    let defaults = EngineConfig::default();
    let engine_config = EngineConfig {
        depth: args.depth.or(config.depth).unwrap_or(defaults.depth),
        skill_level: args.skill.or(config.skill).unwrap_or(defaults.skill_level),
        elo: args.elo.or(config.elo).unwrap_or(defaults.elo),
        ..defaults
    };
    let path = if args.mock { None } else { config.engine_path(args.engine.clone()) };
    if !args.mock && path.is_none() {
        bail!("no engine: pass --engine, set {}, or use --mock", movesense_core::engine::ENGINE_ENV);
    }
    let size = args.pool.or(config.engine_pool).unwrap_or(1).max(1);
    let mut sessions = Vec::with_capacity(size);
    for _ in 0..size {
        let transport: Box<dyn Transport> = match &path {
            Some(p) => Box::new(ProcessTransport::spawn(p)?),
            None => Box::new(MockEngine::new()),
        };
        let session = EngineSession::start(transport, engine_config.clone())?;
        for option in session.rejected_options() {
            eprintln!("warning: engine rejected option {option}");
        }
        sessions.push(session);
    }
    Ok(EnginePool::new(sessions))
}

#[derive(Serialize)]
struct CompareSummary<'a> {
    candidates: usize,
    sampled: usize,
    evaluated: usize,
    approximate: usize,
    skipped: &'a [(String, String)],
    contingency: [[usize; 3]; 3],
}

#[derive(Serialize)]
struct RawOutput<'a> {
    record_id: &'a str,
    lines: &'a [String],
}

fn engine_compare(args: &EngineCompareArgs, config: &Config, seed: u64) -> Result<()> {
    let records = load_corpus(&args.corpus)?;
    let model = args.model.as_deref().map(SentimentModel::load).transpose()?;
    let labels = match (args.labels, &model) {
        (Labels::Gold, _) => LabelSource::Gold,
        (Labels::Predicted, Some(model)) => LabelSource::Predicted { model, variant: args.variant },
        (Labels::Predicted, None) => bail!("--labels predicted needs --model"),
    };
    let mut pool = engine_pool(args, config)?;
    let outcome = pipeline::engine_compare(&records, &labels, args.sample, seed, &mut pool)?;

    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let results = args.out_dir.join("results.csv");
    write_results(&outcome.rows, std::fs::File::create(&results)?).with_context(|| format!("writing {}", results.display()))?;
    std::fs::write(args.out_dir.join("contingency.csv"), outcome.table.to_csv())?;
    let mut raw = String::new();
    for (id, lines) in &outcome.raw_output {
        raw.push_str(&serde_json::to_string(&RawOutput { record_id: id, lines })?);
        raw.push('\n');
    }
    std::fs::write(args.out_dir.join("engine_output.jsonl"), raw)?;
    write_json(
        &args.out_dir.join("summary.json"),
        &CompareSummary {
            candidates: outcome.candidates,
            sampled: outcome.rows.len() + outcome.skipped.len(),
            evaluated: outcome.rows.len(),
            approximate: outcome.rows.iter().filter(|r| r.approximate).count(),
            skipped: &outcome.skipped,
            contingency: outcome.table.counts,
        },
    )?;
    println!(
        "evaluated {} of {} eligible records ({} skipped)",
        outcome.rows.len(),
        outcome.candidates,
        outcome.skipped.len()
    );
    print!("{}", outcome.table.to_csv());
    Ok(())
}

fn iaa(
    corpus: Option<&Path>,
    names: &[String],
    common: f64,
    specific: Option<f64>,
    compare: Option<&[PathBuf]>,
    out: Option<&Path>,
    seed: u64,
) -> Result<()> {
    if let Some([a, b]) = compare {
        let labels = |p: &Path| -> Result<BTreeMap<String, _>> {
            Ok(load_corpus(p)?
                .into_iter()
                .filter_map(|r: AnnotationRecord| Some((r.record_id, r.sentiment?)))
                .collect())
        };
        let (la, lb) = (labels(a)?, labels(b)?);
        let (xa, xb): (Vec<_>, Vec<_>) = la.iter().filter_map(|(id, s)| Some((*s, *lb.get(id)?))).unzip();
        let kappa = cohen_kappa(&xa, &xb)?;
        println!("kappa {kappa:.4} over {} shared records", xa.len());
        if let Some(out) = out {
            write_json(out, &serde_json::json!({ "kappa": kappa, "shared": xa.len() }))?;
        }
        return Ok(());
    }
    let corpus = corpus.context("--corpus is required")?;
    let ids: Vec<String> = load_corpus(corpus)?.into_iter().map(|r| r.record_id).collect();
    let assignment = assign_iaa_subset(&ids, names, common, specific, seed)?;
    println!("common {}", assignment.common.len());
    for (a, ids) in &assignment.specific {
        println!("{a} {}", ids.len());
    }
    match out {
        Some(out) => write_json(out, &assignment),
        None => {
            println!("{}", serde_json::to_string_pretty(&assignment)?);
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let seed_or = |default: u64| cli.seed.or(config.seed).unwrap_or(default);
    match cli.command {
        Command::Extract { input, lexicon: lex, clusters, out } => {
            let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let sentences = pipeline::parse_sentences(&text)?;
            let types = match clusters {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    Some(parse_clustering_tsv(&text)?.into_iter().map(|(lemma, (_, t))| (lemma, t)).collect())
                }
                None => None,
            };
            let extracted = pipeline::extract_records(&sentences, &lexicon(lex.as_deref())?, types.as_ref())?;
            for u in &extracted.unmatched {
                eprintln!("warning: gold aspect matched no record: {u}");
            }
            save_corpus(&extracted.records, &out)?;
            let labeled = extracted.records.iter().filter(|r| r.sentiment.is_some()).count();
            println!("{} records from {} sentences, {labeled} labeled", extracted.records.len(), sentences.len());
        }
        Command::Split { corpus, out } => {
            let split = split_corpus(&load_corpus(&corpus)?, seed_or(DEFAULT_SPLIT_SEED))?;
            let [train, validation, test] = split.sizes();
            write_json(&out, &split)?;
            println!("train {train} validation {validation} test {test}");
        }
        Command::Augment { corpus, split, targets, out } => {
            let records = load_corpus(&corpus)?;
            let split: Option<DatasetSplit> = split.as_deref().map(read_json).transpose()?;
            let outcome = pipeline::augment_records(&records, split.as_ref(), targets, seed_or(DEFAULT_SPLIT_SEED))?;
            save_corpus(&outcome.records, &out)?;
            println!("before {}", outcome.before);
            println!("after {}", outcome.after);
            println!("added {}", outcome.added);
        }
        Command::Iaa { corpus, annotators: names, common, specific, compare, out } => {
            iaa(corpus.as_deref(), &annotators(&names, &config), common, specific, compare.as_deref(), out.as_deref(), seed_or(DEFAULT_SPLIT_SEED))?;
        }
        Command::Cluster { embeddings, lexicon: lex, iterations, threshold, out } => {
            let embeddings = match embeddings {
                Some(p) => Embeddings::load(p)?,
                None => Embeddings::parse(BUNDLED_VECTORS)?,
            };
            let (clustering, types, missing) = pipeline::cluster_lexicon(
                &lexicon(lex.as_deref())?,
                &embeddings,
                threshold.or(config.threshold).unwrap_or(DEFAULT_THRESHOLD),
                seed_or(DEFAULT_SEED),
                iterations.or(config.iterations).unwrap_or(DEFAULT_ITERATIONS),
            )?;
            for lemma in &missing {
                eprintln!("warning: no embedding for {lemma}; left out");
            }
            std::fs::write(&out, clustering_to_tsv(&clustering, &types)).with_context(|| format!("writing {}", out.display()))?;
            println!("{} lemmas in {} clusters", clustering.assignment.len(), clustering.cluster_count());
        }
        Command::Train { corpus, split, variant, training, out } => {
            let records = load_corpus(&corpus)?;
            let split: DatasetSplit = read_json(&split)?;
            let model = pipeline::train_model(&records, &split, variant, train_config(&training, &config, seed_or(DEFAULT_SPLIT_SEED)))?;
            model.save(&out)?;
            println!(
                "best epoch {} validation micro-F1 {:.4}",
                model.best_epoch,
                model.history.get(model.best_epoch.wrapping_sub(1)).copied().unwrap_or(f64::NAN)
            );
        }
        Command::Eval { model, corpus, split, part, variant, out } => {
            let model = SentimentModel::load(&model)?;
            let records = load_corpus(&corpus)?;
            let split: DatasetSplit = read_json(&split)?;
            let (ids, name) = split_ids(&split, part);
            let report = pipeline::evaluate(&model, &records, ids, name, variant)?;
            println!("{} {name} micro-F1 {:.4} on {} records", report.variant, report.micro_f1, report.size);
            if let Some(out) = out {
                write_json(&out, &report)?;
            }
        }
        Command::Experiment { corpus, split, variant, seeds, training, out } => {
            let variants: Vec<InfusionVariant> = match variant.as_str() {
                "all" => InfusionVariant::ALL.to_vec(),
                v => vec![v.parse()?],
            };
            let records = load_corpus(&corpus)?;
            let split: DatasetSplit = read_json(&split)?;
            let reports = pipeline::experiment(&records, &split, &variants, &seeds, train_config(&training, &config, 0))?;
            for r in &reports {
                println!("{} mean test micro-F1 {:.4} over {} runs", r.variant, r.mean_f1, r.runs.len());
            }
            if let Some(out) = out {
                write_json(&out, &reports)?;
            }
        }
        Command::EngineCompare(args) => engine_compare(&args, &config, seed_or(DEFAULT_SPLIT_SEED))?,
        Command::AnnotateServe { port, host, tasks, static_dir } => {
            let service = open_service(&tasks, &config, seed_or(DEFAULT_SPLIT_SEED))?;
            println!("{} tasks for {} annotators", service.task_count(), service.annotators().count());
            let shared = Arc::new(RwLock::new(service));
            tokio::runtime::Runtime::new()?.block_on(api::serve(SocketAddr::new(host, port), shared, static_dir))?;
        }
        Command::AnnotateExport { tasks, out } => {
            let service = open_service(&tasks, &config, seed_or(DEFAULT_SPLIT_SEED))?;
            save_corpus(&service.records(), &out)?;
            println!("{} records, {} submissions", service.record_count(), service.log_length());
        }
    }
    Ok(())
}
