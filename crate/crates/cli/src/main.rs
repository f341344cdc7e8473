use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use hopwise::classifier::{
    compute_min_hop, label_query, train, ClassifierModel, Complexity, ComplexityLabel,
};
use hopwise::dataset::{load_dataset, load_feedback, write_jsonl, DatasetRecord};
use hopwise::llm::{LlmClient, MockOracle};
use hopwise::pipeline::{
    build_chat_client, build_ranker, evaluate, run_query, Engine, PipelineConfig, RouteMode,
};
use hopwise::synth::{generate_graph, generate_questions, GraphSpec};
use hopwise::{load_triples, KnowledgeGraph};

/// Adaptive multi-hop question answering over knowledge graphs.
#[derive(Debug, Parser)]
#[command(name = "hopwise", version)]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a triples file and print store statistics.
    Ingest(IngestArgs),
    /// Label a dataset against a graph and train a complexity classifier.
    Train(TrainArgs),
    /// Answer a single question and print its trace.
    Answer(AnswerArgs),
    /// Evaluate a dataset and report Hits@1.
    Eval(EvalArgs),
    /// Fine-tune a classifier on refined labels.
    Adapt(AdaptArgs),
    /// Write a synthetic graph with question sets.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Route {
    Simple,
    Complex,
}

fn route_mode(r: Option<Route>) -> RouteMode {
    match r {
        None => RouteMode::Auto,
        Some(Route::Simple) => RouteMode::Simple,
        Some(Route::Complex) => RouteMode::Complex,
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Tab-separated triples file.
    #[arg(long)]
    kg: PathBuf,
    /// Write the deduplicated triples here.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Print statistics as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kg: Option<PathBuf>,
    /// Line-delimited records with gold answers.
    #[arg(long)]
    dataset: PathBuf,
    /// Output classifier file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnswerArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    question: String,
    /// Topic entity of the question (repeatable).
    #[arg(short, long = "entity", required = true)]
    entities: Vec<String>,
    /// Gold answer used for scoring and by the mock LLM (repeatable).
    #[arg(short, long = "answer")]
    answers: Vec<String>,
    /// Skip the classifier and use this pipeline.
    #[arg(long, value_enum)]
    force_route: Option<Route>,
    /// Use the offline oracle instead of the chat endpoint.
    #[arg(long)]
    mock_llm: bool,
    /// Also ask for the correct reasoning path.
    #[arg(long)]
    feedback: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum)]
    force_route: Option<Route>,
    #[arg(long)]
    mock_llm: bool,
    /// Write the report as JSON (`-` for stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write one trace per query as line-delimited JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the classifier after feedback adaptation.
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Override the configured worker count.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct AdaptArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    /// Line-delimited `{"question", "label"}` records.
    #[arg(long)]
    feedback: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10_000)]
    triples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluation questions per hop count 1 to 4.
    #[arg(long, default_value_t = 25)]
    per_hop: usize,
    /// Training questions per hop count 1 to 4.
    #[arg(long, default_value_t = 200)]
    train_per_hop: usize,
    /// Directory for kg.tsv, train.jsonl and test.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => {
            PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))
        }
        None => Ok(PipelineConfig::default()),
    }
}

fn load_graph(flag: Option<&Path>, cfg: &PipelineConfig) -> Result<KnowledgeGraph> {
    let path = flag.or(cfg.kg.as_deref()).ok_or_else(|| {
        hopwise::Error::Config("no graph: pass --kg or set `kg` in the config".into())
    })?;
    let graph = load_triples(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    log::info!("{}: {}", path.display(), graph.stats());
    Ok(graph)
}

fn load_model(path: &Path) -> Result<ClassifierModel> {
    ClassifierModel::load(open(path)?).with_context(|| format!("reading model {}", path.display()))
}

/// The model named on the command line or in the config; required unless a
/// route is forced.
fn routing_model(
    flag: Option<&Path>,
    cfg: &PipelineConfig,
    mode: RouteMode,
) -> Result<Option<ClassifierModel>> {
    match flag.or(cfg.model.as_deref()) {
        Some(p) => load_model(p).map(Some),
        None if mode == RouteMode::Auto => Err(hopwise::Error::Config(
            "no classifier: pass --model, set `model` in the config, or use --force-route".into(),
        )
        .into()),
        None => Ok(None),
    }
}

fn save_model(model: &ClassifierModel, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    model.save(&mut out)?;
    out.flush()?;
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let graph = load_graph(Some(&args.kg), &PipelineConfig::default())?;
    let stats = graph.stats();
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "entities": stats.entities,
                "relations": stats.relations,
                "triples": stats.triples,
            })
        );
    } else {
        println!("{stats}");
    }
    if let Some(path) = args.dump {
        let mut out = create(&path)?;
        graph.write_triples(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let graph = load_graph(args.kg.as_deref(), &cfg)?;
    let records = load_dataset(open(&args.dataset)?, true)
        .with_context(|| format!("reading {}", args.dataset.display()))?;

    let mut samples: Vec<(String, ComplexityLabel)> = Vec::with_capacity(records.len());
    let mut skipped = 0;
    for r in &records {
        match compute_min_hop(&graph, &r.question_entities, &r.answers) {
            Ok(Some(h)) => samples.push((r.question.clone(), label_query(h, cfg.delta))),
            Ok(None) => {
                log::debug!("{}: answer unreachable, skipped", r.id);
                skipped += 1;
            }
            Err(e) => {
                log::debug!("{}: {e}, skipped", r.id);
                skipped += 1;
            }
        }
    }
    if skipped > 0 {
        log::warn!(
            "{skipped} of {} records could not be labeled",
            records.len()
        );
    }
    let simple = samples
        .iter()
        .filter(|(_, l)| l.value == Complexity::Simple)
        .count();
    let (model, report) = train(&samples, cfg.encoder(), cfg.delta, &cfg.train_params())?;
    save_model(&model, &args.out)?;
    println!(
        "trained on {} questions ({simple} simple, {} complex, {skipped} skipped)",
        report.samples,
        report.samples - simple
    );
    println!(
        "final loss {:.4}, training accuracy {:.4}",
        report.final_loss, report.accuracy
    );
    Ok(())
}

fn mock_for(records: &[DatasetRecord]) -> MockOracle {
    let mut mock = MockOracle::new();
    for r in records {
        mock.insert(&r.question, &r.answers);
    }
    mock
}

fn client(cfg: &PipelineConfig, mock: Option<MockOracle>) -> Box<dyn LlmClient> {
    match mock {
        Some(m) => Box::new(m),
        None => Box::new(build_chat_client(cfg)),
    }
}

fn answer(args: AnswerArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let graph = load_graph(args.kg.as_deref(), &cfg)?;
    let mode = route_mode(args.force_route);
    let model = routing_model(args.model.as_deref(), &cfg, mode)?;
    let record = DatasetRecord {
        id: "cli".into(),
        question: args.question,
        question_entities: args.entities,
        answers: args.answers,
    };
    let ranker = build_ranker(&cfg);
    let llm = client(
        &cfg,
        args.mock_llm
            .then(|| mock_for(std::slice::from_ref(&record))),
    );
    let engine = Engine {
        graph: &graph,
        config: &cfg,
        ranker: ranker.as_ref(),
        llm: llm.as_ref(),
    };
    let out = run_query(&engine, model.as_ref(), &record, mode, args.feedback);
    println!("{}", out.answer.as_deref().unwrap_or("(no answer)"));
    println!("{}", serde_json::to_string_pretty(&out.trace)?);
    if let Some(e) = out.trace.errors.first() {
        log::warn!("{:?} stage failed: {}", e.stage, e.message);
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let mut cfg = load_config(Some(&args.config))?;
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    let graph = load_graph(args.kg.as_deref(), &cfg)?;
    let records = load_dataset(open(&args.dataset)?, true)
        .with_context(|| format!("reading {}", args.dataset.display()))?;
    let mode = route_mode(args.force_route);
    let model = routing_model(args.model.as_deref(), &cfg, mode)?;
    let ranker = build_ranker(&cfg);
    let llm = client(&cfg, args.mock_llm.then(|| mock_for(&records)));
    let engine = Engine {
        graph: &graph,
        config: &cfg,
        ranker: ranker.as_ref(),
        llm: llm.as_ref(),
    };
    let ev = evaluate(&engine, model, &records, mode)?;

    print!("{}", ev.report.render_table());
    match args.report.as_deref() {
        Some(p) if p == Path::new("-") => println!("{}", ev.report.to_json_pretty()),
        Some(p) => {
            let mut out = create(p)?;
            writeln!(out, "{}", ev.report.to_json_pretty())?;
            out.flush()?;
        }
        None => {}
    }
    if let Some(p) = &args.trace {
        let mut out = create(p)?;
        write_jsonl(&ev.traces, &mut out)?;
        out.flush()?;
    }
    if let Some(p) = &args.save_model {
        let model = ev
            .model
            .as_ref()
            .ok_or_else(|| anyhow!("--save-model needs a classifier; none was used"))?;
        save_model(model, p)?;
    }
    Ok(())
}

fn adapt(args: AdaptArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let model = load_model(&args.model)?;
    let feedback: Vec<(String, Complexity)> = load_feedback(open(&args.feedback)?)
        .with_context(|| format!("reading {}", args.feedback.display()))?
        .into_iter()
        .map(|r| (r.question, r.label))
        .collect();
    if feedback.is_empty() {
        bail!("feedback file {} holds no records", args.feedback.display());
    }
    let before = model.loss(&feedback)?;
    let next = model.fast_adapt(&feedback, &cfg.adapt_params())?;
    let after = next.loss(&feedback)?;
    save_model(&next, &args.out)?;
    println!(
        "adapted on {} labels: loss {before:.4} -> {after:.4}, version {}",
        feedback.len(),
        next.version
    );
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let graph = generate_graph(GraphSpec {
        triples: args.triples,
        seed: args.seed,
    })?;
    let mut out = create(&args.out_dir.join("kg.tsv"))?;
    graph.write_triples(&mut out)?;
    out.flush()?;
    let sets = [
        ("train.jsonl", args.train_per_hop, args.seed ^ 0x7A1, "t"),
        ("test.jsonl", args.per_hop, args.seed ^ 0x7E57, "q"),
    ];
    for (name, per_hop, seed, prefix) in sets {
        let records: Vec<DatasetRecord> = generate_questions(&graph, &[per_hop; 4], seed, prefix)
            .into_iter()
            .map(|q| q.record)
            .collect();
        let mut out = create(&args.out_dir.join(name))?;
        write_jsonl(&records, &mut out)?;
        out.flush()?;
        println!("{name}: {} questions", records.len());
    }
    println!("kg.tsv: {}", graph.stats());
    Ok(())
}

fn category(err: &anyhow::Error) -> &'static str {
    use hopwise::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) => "config",
                E::Parse { .. } | E::Dataset { .. } | E::EmptyGraph => "input",
                E::UnknownEntity(_) | E::EmptySeeds | E::Labeling(_) | E::EmptyText => "input",
                E::DegenerateTraining(_) => "training",
                E::ModelFormat(_) | E::Json(_) => "format",
                E::Llm(_) => "llm",
                E::Io(_) => "io",
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return "io";
        }
    }
    "error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train_cmd(a),
        Command::Answer(a) => answer(a),
        Command::Eval(a) => eval(a),
        Command::Adapt(a) => adapt(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e:#}", category(&e));
            ExitCode::FAILURE
        }
    }
}
