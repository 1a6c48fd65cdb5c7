//! Command-line front end: inspect pipeline typology, ingest corpora,
//! build index files, run one-off queries, and produce seeded,
//! byte-reproducible evaluation reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use artk::backbone::{NGramLm, PrefixEmbedder};
use artk::data::{
    read_jsonl, read_text_corpus, tokenize, write_jsonl, ClaimRecord, DialogueRecord, DocRecord,
    QaRecord,
};
use artk::dense::{DenseIndex, Metric};
use artk::eval::{self, EvalReport, ExampleRecord, RunConfig};
use artk::kb::{MemorizedKb, TripleStore};
use artk::sparse::InvertedIndex;
use artk::systems::lm::{
    fit_scalar_gate, BaseLm, CacheLm, GatedLm, Kglm, KglmDecision, KnnLm, LmStepper, TokenSource,
    DEFAULT_GATE_GRID,
};
use artk::systems::qa::{pullnet_lite, DprQa, NnQa, PullnetConfig};
use artk::systems::{descriptor, PIPELINE_NAMES};
use artk::fusion::GateParams;

#[derive(Parser)]
#[command(
    name = "artk",
    version,
    about = "Retrieval-augmented pipelines: describe, index, run, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a pipeline's typology record.
    Describe(DescribeArgs),
    /// Validate a data file and report its shape.
    Ingest(IngestArgs),
    /// Build a dense or sparse index file from documents.
    BuildIndex(BuildIndexArgs),
    /// Run one query through a pipeline.
    Run(RunArgs),
    /// Evaluate a language-modelling pipeline by stream perplexity.
    EvalLm(EvalLmArgs),
    /// Evaluate a question-answering pipeline by exact match.
    EvalQa(EvalQaArgs),
}

#[derive(Args)]
struct DescribeArgs {
    /// Pipeline name; see --list.
    pipeline: Option<String>,
    /// List the known pipeline names.
    #[arg(long)]
    list: bool,
    /// Emit the record as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Text,
    Docs,
    Qa,
    Claims,
    Dialogue,
}

#[derive(Args)]
struct IngestArgs {
    /// Input file: plain text (one sentence per line) or JSON lines.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: DataKind,
    /// Re-emit the records as normalized JSON lines.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum IndexKind {
    Dense,
    Sparse,
}

#[derive(Args)]
struct BuildIndexArgs {
    /// Documents as JSON lines ({"id", "title", "text"}).
    #[arg(long)]
    docs: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "dense")]
    kind: IndexKind,
    /// Dense metric: l2, ip, or cosine.
    #[arg(long, default_value = "ip")]
    metric: String,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cluster the dense index for approximate probing.
    #[arg(long)]
    partition: bool,
}

#[derive(Args)]
struct RunArgs {
    /// One of the reference pipelines; see `describe --list`.
    pipeline: String,
    /// The query: a prefix, question, claim, or utterance.
    #[arg(long)]
    query: String,
    /// Training corpus, one sentence per line (LM pipelines).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Documents as JSON lines (QA, dialogue, fact checking, pullnet).
    #[arg(long)]
    docs: Option<PathBuf>,
    /// Training QA pairs as JSON lines (nn-qa).
    #[arg(long)]
    qa: Option<PathBuf>,
    /// Knowledge graph as TSV triples (kg-lm, pullnet-lite).
    #[arg(long)]
    kg: Option<PathBuf>,
    /// Comma-separated linked entities (pullnet-lite, fakta).
    #[arg(long)]
    entities: Option<String>,
    /// Comma-separated part-of-speech tags aligned to the query (fakta).
    #[arg(long)]
    tags: Option<String>,
    /// Conversation topic (wizards).
    #[arg(long)]
    topic: Option<String>,
    /// Relation to follow from the query entity (kg-lm).
    #[arg(long)]
    relation: Option<String>,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = artk::systems::lm::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 4)]
    neighbors: usize,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 0.1)]
    smoothing: f64,
    #[arg(long, default_value_t = 2)]
    rounds: usize,
    #[arg(long, default_value_t = 3)]
    fanout: usize,
    /// Print the retrieval trace events as well.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct EvalLmArgs {
    /// base, knn-lm, cache-lm, or gated-lm.
    pipeline: String,
    /// Training corpus, one sentence per line.
    #[arg(long)]
    train: PathBuf,
    /// Evaluation corpus, one sentence per line.
    #[arg(long)]
    eval: PathBuf,
    /// Development corpus for selecting lambda (knn-lm) or fitting the
    /// gate (gated-lm).
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 0.1)]
    smoothing: f64,
    /// Key width; defaults to the pipeline's reference width.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = artk::systems::lm::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = artk::systems::lm::DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = artk::systems::lm::DEFAULT_CACHE_CAPACITY)]
    capacity: usize,
    #[arg(long, default_value_t = 4)]
    neighbors: usize,
    /// Write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalQaArgs {
    /// dpr-qa or nn-qa.
    pipeline: String,
    /// Documents as JSON lines (dpr-qa).
    #[arg(long)]
    docs: Option<PathBuf>,
    /// Training QA pairs as JSON lines (nn-qa).
    #[arg(long)]
    train_qa: Option<PathBuf>,
    /// Test questions as JSON lines ({"question", "answer", "gold_doc"?}).
    #[arg(long)]
    qa: PathBuf,
    #[arg(long, default_value_t = artk::systems::qa::DEFAULT_PASSAGES)]
    passages: usize,
    #[arg(long, default_value_t = artk::systems::qa::DEFAULT_MAX_SPAN)]
    max_span: usize,
    #[arg(long, default_value_t = 1.0)]
    rerank_weight: f64,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cutoff for recall@k over the passage ranking.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() {
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Describe(args) => describe(args),
        Command::Ingest(args) => ingest(args),
        Command::BuildIndex(args) => build_index(args),
        Command::Run(args) => run(args),
        Command::EvalLm(args) => eval_lm(args),
        Command::EvalQa(args) => eval_qa(args),
    }
}

/// Input paths resolve against ARTK_DATA_DIR when relative.
fn data_path(path: &Path) -> PathBuf {
    match std::env::var_os("ARTK_DATA_DIR") {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn describe(args: DescribeArgs) -> Result<()> {
    if args.list {
        for name in PIPELINE_NAMES {
            println!("{name}");
        }
        return Ok(());
    }
    let name = args
        .pipeline
        .ok_or_else(|| anyhow!("pass a pipeline name or --list"))?;
    let record = descriptor(&name)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&record)?);
    } else {
        println!("{record}");
    }
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let input = data_path(&args.input);
    let context = || format!("reading {}", input.display());
    match args.kind {
        DataKind::Text => {
            let corpus = read_text_corpus(&input).with_context(context)?;
            let tokens: usize = corpus.iter().map(Vec::len).sum();
            let vocab: std::collections::BTreeSet<&str> = corpus
                .iter()
                .flatten()
                .map(String::as_str)
                .collect();
            println!(
                "{} sentences, {tokens} tokens, {} distinct",
                corpus.len(),
                vocab.len()
            );
            if args.output.is_some() {
                bail!("text corpora are already normalized; --output applies to JSON kinds");
            }
        }
        DataKind::Docs => {
            let records: Vec<DocRecord> = read_jsonl(&input).with_context(context)?;
            let tokens: usize = records
                .iter()
                .map(|d| tokenize(&d.title).len() + tokenize(&d.text).len())
                .sum();
            println!("{} documents, {tokens} tokens", records.len());
            if let Some(out) = args.output {
                write_jsonl(&out, &records)?;
            }
        }
        DataKind::Qa => {
            let records: Vec<QaRecord> = read_jsonl(&input).with_context(context)?;
            let with_gold = records.iter().filter(|r| r.gold_doc.is_some()).count();
            println!("{} questions, {with_gold} with gold documents", records.len());
            if let Some(out) = args.output {
                write_jsonl(&out, &records)?;
            }
        }
        DataKind::Claims => {
            let records: Vec<ClaimRecord> = read_jsonl(&input).with_context(context)?;
            for (i, r) in records.iter().enumerate() {
                let tokens = tokenize(&r.claim);
                if tokens.len() != r.tags.len() {
                    bail!(
                        "{}:{}: claim has {} tokens but {} tags",
                        input.display(),
                        i + 1,
                        tokens.len(),
                        r.tags.len()
                    );
                }
            }
            println!("{} claims, all tag-aligned", records.len());
            if let Some(out) = args.output {
                write_jsonl(&out, &records)?;
            }
        }
        DataKind::Dialogue => {
            let records: Vec<DialogueRecord> = read_jsonl(&input).with_context(context)?;
            let turns: usize = records.iter().map(|r| r.history.len()).sum();
            println!("{} dialogues, {turns} turns", records.len());
            if let Some(out) = args.output {
                write_jsonl(&out, &records)?;
            }
        }
    }
    Ok(())
}

fn build_index(args: BuildIndexArgs) -> Result<()> {
    let docs: Vec<DocRecord> = read_jsonl(&data_path(&args.docs))?;
    match args.kind {
        IndexKind::Dense => {
            let metric: Metric = args.metric.parse()?;
            let embedder = PrefixEmbedder::new(args.dim, args.gamma, args.seed)?;
            let mut entries = Vec::with_capacity(docs.len());
            for doc in &docs {
                let mut tokens = tokenize(&doc.title);
                tokens.extend(tokenize(&doc.text));
                entries.push((embedder.embed_bag(&tokens)?, doc.id.clone()));
            }
            let mut index = DenseIndex::build(entries, metric)?;
            if args.partition {
                index.partition(args.seed, artk::dense::DEFAULT_PROBES)?;
            }
            index.save(&args.output)?;
            println!(
                "dense index: {} vectors, dim {}, metric {metric}{} -> {}",
                index.len(),
                index.dim(),
                if index.is_partitioned() {
                    ", partitioned"
                } else {
                    ""
                },
                args.output.display()
            );
        }
        IndexKind::Sparse => {
            let entries: Vec<(String, Vec<String>)> = docs
                .iter()
                .map(|doc| {
                    let mut tokens = tokenize(&doc.title);
                    tokens.extend(tokenize(&doc.text));
                    (doc.id.clone(), tokens)
                })
                .collect();
            let index = InvertedIndex::build(&entries)?;
            index.save(&args.output)?;
            println!(
                "sparse index: {} documents, {} terms -> {}",
                index.n_docs(),
                index.n_terms(),
                args.output.display()
            );
        }
    }
    Ok(())
}

fn comma_list(s: &Option<String>) -> Vec<String> {
    s.as_deref()
        .map(|s| {
            s.split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(str::to_owned)
                .collect()
        })
        .unwrap_or_default()
}

fn load_docs(path: &Option<PathBuf>, pipeline: &str) -> Result<Vec<DocRecord>> {
    let path = path
        .as_ref()
        .ok_or_else(|| anyhow!("{pipeline} needs --docs"))?;
    Ok(read_jsonl(&data_path(path))?)
}

fn load_train(path: &Option<PathBuf>, pipeline: &str) -> Result<Vec<Vec<String>>> {
    let path = path
        .as_ref()
        .ok_or_else(|| anyhow!("{pipeline} needs --train"))?;
    Ok(read_text_corpus(&data_path(path))?)
}

fn print_trace(events: &[String]) {
    for event in events {
        println!("  . {event}");
    }
}

fn run(args: RunArgs) -> Result<()> {
    let name = args.pipeline.as_str();
    match name {
        "knn-lm" | "cache-lm" | "gated-lm" => {
            let train = load_train(&args.train, name)?;
            let lm = Arc::new(NGramLm::train(&train, args.order, args.smoothing)?);
            let embedder = PrefixEmbedder::new(args.dim, args.gamma, args.seed)?;
            let prefix = tokenize(&args.query);
            if prefix.is_empty() {
                bail!("the query prefix is empty");
            }
            let mut stepper: Box<dyn LmStepper> = match name {
                "knn-lm" => {
                    let kb = Arc::new(MemorizedKb::build(&train, embedder)?);
                    Box::new(KnnLm::new(lm.clone(), kb, args.lambda, args.neighbors)?)
                }
                "cache-lm" => {
                    let mut cache = CacheLm::new(
                        lm.clone(),
                        Arc::new(embedder),
                        artk::systems::lm::DEFAULT_CACHE_CAPACITY,
                        args.lambda,
                        artk::systems::lm::DEFAULT_THETA,
                    )?;
                    // Warm the cache on the prefix itself so the query
                    // demonstrates the mechanism.
                    for i in 1..prefix.len() {
                        cache.step(&prefix[..i], &prefix[i])?;
                    }
                    Box::new(cache)
                }
                _ => {
                    let kb = Arc::new(MemorizedKb::build_with_metric(
                        &train,
                        embedder,
                        Metric::InnerProduct,
                    )?);
                    Box::new(GatedLm::new(
                        lm.clone(),
                        kb,
                        GateParams::neutral(args.dim),
                        args.neighbors,
                    )?)
                }
            };
            let step = stepper.step(&prefix, "")?;
            let mut top: Vec<(usize, f64)> =
                (0..step.p_m.len()).map(|i| (i, step.p_m.prob(i))).collect();
            top.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            println!("next token after {:?}:", args.query);
            for (id, p) in top.into_iter().take(5) {
                println!("  {:<16} {p:.4}", lm.vocab().token(id as u32));
            }
            if let Some(g) = step.gate {
                println!("gate toward the backbone: {g:.4}");
            }
            if args.trace {
                if let Some(trace) = step.trace {
                    print_trace(&trace.events);
                }
            }
        }
        "kg-lm" => {
            let kg_path = args.kg.as_ref().ok_or_else(|| anyhow!("kg-lm needs --kg"))?;
            let store = Arc::new(TripleStore::from_tsv(&data_path(kg_path))?);
            let relation = args
                .relation
                .as_ref()
                .ok_or_else(|| anyhow!("kg-lm needs --relation to follow from the query entity"))?;
            let mut kglm = Kglm::new(store, args.seed);
            kglm.step(&KglmDecision::NewEntity {
                entity: args.query.clone(),
            })?;
            let step = kglm.step(&KglmDecision::RelatedEntity {
                parent: args.query.clone(),
                relation: relation.clone(),
            })?;
            match step.source {
                TokenSource::Entity(e) => println!("{} --{relation}--> {e}", args.query),
                TokenSource::Backbone => unreachable!("related-entity steps emit entities"),
            }
            if args.trace {
                if let Some(trace) = step.trace {
                    print_trace(&trace.events);
                }
            }
        }
        "dpr-qa" => {
            let docs = load_docs(&args.docs, name)?;
            let qa = DprQa::build(&docs, PrefixEmbedder::new(args.dim, args.gamma, args.seed)?)?;
            let result = qa.answer(&args.query)?;
            println!(
                "answer: {}",
                result.answer.as_deref().unwrap_or("(no span found)")
            );
            println!("passage: {}", result.support);
            if args.trace {
                print_trace(&result.trace.events);
            }
        }
        "nn-qa" => {
            let qa_path = args.qa.as_ref().ok_or_else(|| anyhow!("nn-qa needs --qa"))?;
            let pairs: Vec<QaRecord> = read_jsonl(&data_path(qa_path))?;
            let qa = NnQa::build(&pairs, PrefixEmbedder::new(args.dim, args.gamma, args.seed)?)?;
            let result = qa.answer(&args.query)?;
            println!("answer: {}", result.answer.as_deref().unwrap_or("(none)"));
            println!("recalled from: {:?}", result.support);
            if args.trace {
                print_trace(&result.trace.events);
            }
        }
        "pullnet-lite" => {
            let kg_path = args
                .kg
                .as_ref()
                .ok_or_else(|| anyhow!("pullnet-lite needs --kg"))?;
            let store = TripleStore::from_tsv(&data_path(kg_path))?;
            let docs = load_docs(&args.docs, name)?;
            let entries: Vec<(String, Vec<String>)> = docs
                .iter()
                .map(|d| {
                    let mut tokens = tokenize(&d.title);
                    tokens.extend(tokenize(&d.text));
                    (d.id.clone(), tokens)
                })
                .collect();
            let index = InvertedIndex::build(&entries)?;
            let entities = comma_list(&args.entities);
            let outcome = pullnet_lite(
                &tokenize(&args.query),
                &entities,
                &store,
                &index,
                &PullnetConfig {
                    rounds: args.rounds,
                    fanout: args.fanout,
                },
            )?;
            match &outcome.answer {
                Some(a) => println!("answer: {a} (relevance {})", outcome.score),
                None => println!("answer: (nothing reached beyond the question)"),
            }
            println!(
                "pulled {} facts over {} rounds",
                outcome.pulled_facts.len(),
                args.rounds
            );
            if args.trace {
                print_trace(&outcome.trace.events);
            }
        }
        "wizards" => {
            let docs = load_docs(&args.docs, name)?;
            let topic = args
                .topic
                .as_ref()
                .ok_or_else(|| anyhow!("wizards needs --topic"))?;
            let wizards = artk::systems::dialogue::Wizards::build(
                &docs,
                PrefixEmbedder::new(args.dim, args.gamma, args.seed)?,
            )?;
            let history = vec![args.query.clone()];
            let sel = wizards.select(&history, topic)?;
            if sel.empty {
                println!("no passage matched; zero artefact");
            } else {
                println!("passages: {}", sel.passages.join(", "));
                let norm: f64 = sel
                    .artefact
                    .iter()
                    .map(|x| f64::from(*x) * f64::from(*x))
                    .sum::<f64>()
                    .sqrt();
                println!("artefact norm {norm:.4} over dim {}", sel.artefact.len());
            }
            if args.trace {
                print_trace(&sel.trace.events);
            }
        }
        "fakta" => {
            let docs = load_docs(&args.docs, name)?;
            let fakta = artk::systems::factcheck::Fakta::build(&docs)?;
            let tags = comma_list(&args.tags);
            let entities = comma_list(&args.entities);
            let outcome = fakta.check(
                &args.query,
                &tags,
                &entities,
                &artk::systems::factcheck::Bm25Relevance::default(),
                &artk::systems::factcheck::NeutralStance,
            )?;
            println!("verdict: {:?}", outcome.label);
            for (doc, stance) in &outcome.stances {
                println!("  {doc}: {stance:?}");
            }
            if args.trace {
                print_trace(&outcome.trace.events);
            }
        }
        other => bail!("unknown pipeline {other:?}; try `artk describe --list`"),
    }
    Ok(())
}

const LAMBDA_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

fn eval_lm(args: EvalLmArgs) -> Result<()> {
    let name = args.pipeline.as_str();
    let dim = args.dim.unwrap_or(match name {
        "knn-lm" => artk::systems::lm::KNN_LM_KEY_DIM,
        "gated-lm" => artk::systems::lm::GATED_LM_KEY_DIM,
        _ => 64,
    });
    let train_path = data_path(&args.train);
    let eval_path = data_path(&args.eval);
    let train = read_text_corpus(&train_path)?;
    let eval_corpus = read_text_corpus(&eval_path)?;
    let dev = args
        .dev
        .as_ref()
        .map(|p| read_text_corpus(&data_path(p)))
        .transpose()?;

    let lm = Arc::new(NGramLm::train(&train, args.order, args.smoothing)?);
    let mut config = RunConfig::new(name, args.seed)
        .param("order", args.order as f64)
        .param("smoothing", args.smoothing)
        .input("train", args.train.display().to_string())
        .input("eval", args.eval.display().to_string());

    let mut stepper: Box<dyn LmStepper> = match name {
        "base" => Box::new(BaseLm::new(lm)),
        "knn-lm" => {
            let embedder = PrefixEmbedder::new(dim, args.gamma, args.seed)?;
            let kb = Arc::new(MemorizedKb::build(&train, embedder)?);
            let lambda = match &dev {
                Some(dev) => {
                    let mut best = (args.lambda, f64::INFINITY);
                    for &l in &LAMBDA_GRID {
                        let mut candidate = KnnLm::new(lm.clone(), kb.clone(), l, args.neighbors)?;
                        let ppl = eval::perplexity(&mut candidate, dev)?.perplexity;
                        if ppl < best.1 {
                            best = (l, ppl);
                        }
                    }
                    println!("selected lambda {} (dev perplexity {:.4})", best.0, best.1);
                    best.0
                }
                None => args.lambda,
            };
            config = config
                .param("lambda", lambda)
                .param("dim", dim as f64)
                .param("neighbors", args.neighbors as f64);
            Box::new(KnnLm::new(lm, kb, lambda, args.neighbors)?)
        }
        "cache-lm" => {
            let embedder = Arc::new(PrefixEmbedder::new(dim, args.gamma, args.seed)?);
            config = config
                .param("lambda", args.lambda)
                .param("theta", args.theta)
                .param("capacity", args.capacity as f64)
                .param("dim", dim as f64);
            Box::new(CacheLm::new(
                lm,
                embedder,
                args.capacity,
                args.lambda,
                args.theta,
            )?)
        }
        "gated-lm" => {
            let embedder = PrefixEmbedder::new(dim, args.gamma, args.seed)?;
            let kb = Arc::new(MemorizedKb::build_with_metric(
                &train,
                embedder,
                Metric::InnerProduct,
            )?);
            let params = match &dev {
                Some(dev) => {
                    let (params, ppl) =
                        fit_scalar_gate(&lm, &kb, args.neighbors, dev, &DEFAULT_GATE_GRID)?;
                    println!("fitted gate (dev perplexity {ppl:.4})");
                    params
                }
                None => GateParams::neutral(dim),
            };
            config = config
                .param("dim", dim as f64)
                .param("neighbors", args.neighbors as f64);
            Box::new(GatedLm::new(lm, kb, params, args.neighbors)?)
        }
        other => bail!("unknown LM pipeline {other:?}; use base, knn-lm, cache-lm, or gated-lm"),
    };
    if let Some(dev_path) = &args.dev {
        config = config.input("dev", dev_path.display().to_string());
    }

    let outcome = eval::perplexity(stepper.as_mut(), &eval_corpus)?;
    println!(
        "perplexity {:.6} over {} tokens",
        outcome.perplexity, outcome.tokens
    );

    if let Some(report_path) = &args.report {
        let mut report = EvalReport::new(config);
        report.descriptor = descriptor(name).ok();
        report
            .metric("perplexity", outcome.perplexity)
            .metric("tokens", outcome.tokens as f64);
        report.per_example = outcome
            .per_sentence
            .iter()
            .enumerate()
            .map(|(i, ppl)| ExampleRecord {
                id: format!("s{i}"),
                log_prob: Some(-ppl.ln()),
                ..ExampleRecord::default()
            })
            .collect();
        std::fs::write(report_path, report.to_json()?)
            .with_context(|| format!("writing {}", report_path.display()))?;
        println!("report -> {}", report_path.display());
    }
    Ok(())
}

fn eval_qa(args: EvalQaArgs) -> Result<()> {
    let name = args.pipeline.as_str();
    let questions: Vec<QaRecord> = read_jsonl(&data_path(&args.qa))?;
    if questions.is_empty() {
        bail!("the question file is empty");
    }
    let embedder = PrefixEmbedder::new(args.dim, args.gamma, args.seed)?;

    enum System {
        Dpr(DprQa),
        Nn(NnQa),
    }
    let mut config = RunConfig::new(name, args.seed)
        .param("dim", args.dim as f64)
        .input("qa", args.qa.display().to_string());
    let system = match name {
        "dpr-qa" => {
            let docs_path = args
                .docs
                .as_ref()
                .ok_or_else(|| anyhow!("dpr-qa needs --docs"))?;
            let docs: Vec<DocRecord> = read_jsonl(&data_path(docs_path))?;
            config = config
                .param("passages", args.passages as f64)
                .param("max_span", args.max_span as f64)
                .param("rerank_weight", args.rerank_weight)
                .input("docs", docs_path.display().to_string());
            System::Dpr(
                DprQa::build(&docs, embedder)?
                    .with_passages(args.passages)?
                    .with_max_span(args.max_span)?
                    .with_rerank_weight(args.rerank_weight)?,
            )
        }
        "nn-qa" => {
            let train_path = args
                .train_qa
                .as_ref()
                .ok_or_else(|| anyhow!("nn-qa needs --train-qa"))?;
            let pairs: Vec<QaRecord> = read_jsonl(&data_path(train_path))?;
            config = config.input("train_qa", train_path.display().to_string());
            System::Nn(NnQa::build(&pairs, embedder)?)
        }
        other => bail!("unknown QA pipeline {other:?}; use dpr-qa or nn-qa"),
    };

    let mut correct = 0usize;
    let mut recall_hits = 0usize;
    let mut mrr_total = 0.0;
    let mut with_gold = 0usize;
    let mut per_example = Vec::with_capacity(questions.len());
    for (i, record) in questions.iter().enumerate() {
        let result = match &system {
            System::Dpr(qa) => qa.answer(&record.question)?,
            System::Nn(qa) => qa.answer(&record.question)?,
        };
        let matched = result
            .answer
            .as_deref()
            .is_some_and(|a| eval::exact_match(a, &record.answer));
        correct += usize::from(matched);
        if let Some(gold) = &record.gold_doc {
            with_gold += 1;
            recall_hits += usize::from(eval::recall_at_k(&result.ranking, gold, args.k));
            mrr_total += eval::mrr(&result.ranking, gold);
        }
        per_example.push(ExampleRecord {
            id: format!("q{i}"),
            prediction: result.answer.clone(),
            gold: Some(record.answer.clone()),
            correct: Some(matched),
            ..ExampleRecord::default()
        });
    }

    let em = correct as f64 / questions.len() as f64;
    println!("exact match {em:.4} over {} questions", questions.len());
    let mut metrics: BTreeMap<String, f64> = BTreeMap::new();
    metrics.insert("exact_match".into(), em);
    metrics.insert("questions".into(), questions.len() as f64);
    if with_gold > 0 {
        let recall = recall_hits as f64 / with_gold as f64;
        let mrr = mrr_total / with_gold as f64;
        println!("recall@{} {recall:.4}, mrr {mrr:.4} over {with_gold} gold-labelled", args.k);
        metrics.insert(format!("recall_at_{}", args.k), recall);
        metrics.insert("mrr".into(), mrr);
    }

    if let Some(report_path) = &args.report {
        let mut report = EvalReport::new(config);
        report.descriptor = descriptor(name).ok();
        report.metrics = metrics;
        report.per_example = per_example;
        std::fs::write(report_path, report.to_json()?)
            .with_context(|| format!("writing {}", report_path.display()))?;
        println!("report -> {}", report_path.display());
    }
    Ok(())
}
