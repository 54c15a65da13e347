//! `dfaforge`: generate Tomita datasets, train second-order RNNs, extract
//! automata and run the experiment sweeps.

mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dfaforge::experiments::{default_epoch_cap, run_dir, run_experiment, train_cell, write_report};
use dfaforge::extraction::{
    collect_activations, dfa_accuracy, extract_from_traces, write_clustering_dump, AcceptanceVote, ClusteringMethod,
    ExtractionConfig, ExtractionReport,
};
use dfaforge::{
    equivalent, generate_dataset, generate_long_testset, ground_truth, to_dot, Dfa, LabeledDataset,
    SecondOrderRnn, Split,
};

use config::{experiment_for, load_sweep_source, parse_k_range, parse_list, RunConfig, SweepSource};

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<dfaforge::Error> for CliError {
    fn from(e: dfaforge::Error) -> Self {
        use dfaforge::Error::*;
        match e {
            InvalidGrammar(_) | InvalidConfig(_) | NeedTwoClusters { .. } | KTooLarge { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "dfaforge", version, about = "Train second-order RNNs on Tomita grammars and extract DFAs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the exhaustive train/test split (and optionally a long test set) as TSV.
    Generate(GenerateArgs),
    /// Train a network and write the model file and per-epoch loss CSV.
    Train(TrainArgs),
    /// Extract a DFA from a trained model.
    Extract(ExtractArgs),
    /// Score a model or a DFA on a dataset.
    Evaluate(EvaluateArgs),
    /// Run an experiment grid: capacity, training-time, random-init or long-string.
    Sweep(SweepArgs),
    /// Render a DFA file or a ground-truth grammar as Graphviz DOT.
    Dot(DotArgs),
}

#[derive(Args, Default)]
struct Common {
    /// JSON run config; flags override its values.
    #[arg(long, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Output directory (default: $DFAFORGE_OUT or ./runs, plus a config-hash subdirectory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Default)]
struct DataFlags {
    /// Tomita grammar, 1 to 7.
    #[arg(long, short)]
    grammar: Option<u8>,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Fraction of strings held out for testing.
    #[arg(long)]
    split: Option<f64>,
}

#[derive(Args, Default)]
struct ModelFlags {
    /// Hidden size N.
    #[arg(long)]
    hidden: Option<usize>,
    /// Epoch cap (default: per-grammar cap).
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

// an alias so clap parses the whole list from a single value
type KList = Vec<usize>;

#[derive(Args, Default)]
struct ClusterFlags {
    #[arg(long, short)]
    k: Option<usize>,
    /// Inclusive range such as 3..15, or a list such as 3,6,9.
    #[arg(long, value_parser = parse_k_range)]
    k_range: Option<KList>,
    #[arg(long, value_parser = parse_method)]
    method: Option<ClusteringMethod>,
    /// Also cluster the states reached after the stop symbol.
    #[arg(long)]
    include_post_stop: bool,
    /// Acceptance voting: `distinct` (each distinct activation once) or `rows`.
    #[arg(long, value_parser = parse_vote)]
    vote: Option<AcceptanceVote>,
}

fn parse_vote(s: &str) -> Result<AcceptanceVote, String> {
    s.parse().map_err(|e: dfaforge::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<ClusteringMethod, String> {
    s.parse().map_err(|e: dfaforge::Error| e.to_string())
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataFlags,
    /// Length of the long test set.
    #[arg(long)]
    long_length: Option<usize>,
    /// Size of the long test set (0 or absent: none).
    #[arg(long)]
    long_count: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    model: ModelFlags,
    /// Keep training after reaching 100% test accuracy.
    #[arg(long)]
    no_early_stop: bool,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    common: Common,
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// TSV dataset to collect activations on (default: the regenerated test split).
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    dataflags: DataFlags,
    #[command(flatten)]
    cluster: ClusterFlags,
    /// Also write the cluster assignment of every activation.
    #[arg(long)]
    dump_clusters: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    dfa: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Also compare the DFA with this grammar's ground truth.
    #[arg(long, short)]
    grammar: Option<u8>,
}

#[derive(Args)]
struct SweepArgs {
    /// capacity, training-time, random-init or long-string.
    experiment: String,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    cluster: ClusterFlags,
    /// Worker threads for grid cells (0: one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_parser = parse_list)]
    n_values: Option<Vec<usize>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, value_parser = parse_list)]
    checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    n_inits: Option<usize>,
    #[arg(long)]
    long_hidden: Option<usize>,
    #[arg(long, value_parser = parse_list)]
    lengths: Option<Vec<usize>>,
    #[arg(long)]
    n_per_length: Option<usize>,
    #[arg(long)]
    attempts: Option<usize>,
    #[arg(long)]
    long_length: Option<usize>,
    #[arg(long)]
    long_count: Option<usize>,
}

#[derive(Args)]
struct DotArgs {
    #[arg(long, conflicts_with = "grammar", required_unless_present = "grammar")]
    dfa: Option<PathBuf>,
    #[arg(long, short)]
    grammar: Option<u8>,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flags as a partial config, to be laid over the config file.
fn flag_config(
    command: &str,
    common: &Common,
    data: Option<&DataFlags>,
    model: Option<&ModelFlags>,
    cluster: Option<&ClusterFlags>,
) -> RunConfig {
    let mut rc = RunConfig {
        command: Some(command.into()),
        seed: common.seed,
        out: common.out.clone(),
        ..Default::default()
    };
    if let Some(d) = data {
        rc.grammar = d.grammar;
        rc.min_len = d.min_len;
        rc.max_len = d.max_len;
        rc.split = d.split;
    }
    if let Some(m) = model {
        rc.hidden = m.hidden;
        rc.epochs = m.epochs;
        rc.lr = m.lr;
    }
    if let Some(c) = cluster {
        rc.k = c.k;
        rc.k_values = c.k_range.clone();
        rc.method = c.method;
        rc.include_post_stop_states = c.include_post_stop.then_some(true);
        rc.acceptance_vote = c.vote;
    }
    rc
}

fn resolve(common: &Common, flags: RunConfig) -> Result<RunConfig, CliError> {
    let base = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Ok(base.overlay(&flags))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_run_config(dir: &Path, rc: &RunConfig) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(rc).expect("config serializes");
    write_file(&dir.join("run.json"), json + "\n")
}

fn split_for(rc: &RunConfig) -> Result<Split, CliError> {
    Ok(generate_dataset(
        rc.grammar()?,
        rc.min_len(),
        rc.max_len(),
        rc.split(),
        rc.seed(),
    )?)
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let mut flags = flag_config("generate", &args.common, Some(&args.data), None, None);
    flags.long_length = args.long_length;
    flags.long_count = args.long_count;
    let rc = resolve(&args.common, flags)?;
    let g = rc.grammar()?;
    let split = split_for(&rc)?;
    let dir = rc.out_dir("generate");
    create_dir(&dir)?;
    split.train.save(&dir.join("train.tsv"))?;
    split.test.save(&dir.join("test.tsv"))?;
    let mut summary = format!(
        "train {} ({} positive), test {} ({} positive)",
        split.train.len(),
        split.train.positives(),
        split.test.len(),
        split.test.positives()
    );
    if let Some(n) = rc.long_count.filter(|&n| n > 0) {
        let len = rc.long_length.unwrap_or(200);
        let long = generate_long_testset(g, len, n, rc.seed())?;
        long.save(&dir.join(format!("long{len}.tsv")))?;
        summary += &format!(", long{len} {} ({} positive)", long.len(), long.positives());
    }
    write_run_config(&dir, &rc)?;
    println!("{summary}");
    println!("{}", dir.display());
    Ok(())
}

fn train(args: TrainArgs) -> Result<(), CliError> {
    let rc = resolve(
        &args.common,
        flag_config("train", &args.common, Some(&args.data), Some(&args.model), None),
    )?;
    let g = rc.grammar()?;
    let split = split_for(&rc)?;
    let cfg = rc.train_config(rc.epochs.unwrap_or_else(|| default_epoch_cap(g)));
    let cell = train_cell(
        &split,
        &cfg,
        SecondOrderRnn::default_h_init(rc.hidden()),
        &[],
        !args.no_early_stop,
    )?;
    let dir = rc.out_dir("train");
    create_dir(&dir)?;
    cell.model.save(&dir.join("model.json"), Some(cfg.seed))?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in cell.losses.iter().enumerate() {
        csv += &format!("{},{l}\n", e + 1);
    }
    write_file(&dir.join("loss.csv"), csv)?;
    write_run_config(&dir, &rc)?;
    println!(
        "epochs {} test_accuracy {} converged {}",
        cell.epochs_run, cell.test_accuracy, cell.converged
    );
    println!("{}", dir.display());
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<(), CliError> {
    let mut flags = flag_config(
        "extract",
        &args.common,
        Some(&args.dataflags),
        None,
        Some(&args.cluster),
    );
    flags.include_post_stop_states = args.cluster.include_post_stop.then_some(true);
    let rc = resolve(&args.common, flags)?;
    let (model, _) = SecondOrderRnn::load(&args.model)?;
    let data = match &args.data {
        Some(path) => LabeledDataset::load(path)?,
        None => split_for(&rc)?.test,
    };
    let cfg = ExtractionConfig {
        k: rc.k.unwrap_or(10),
        method: rc.method.unwrap_or(ClusteringMethod::Kmeans),
        seed: rc.seed(),
        include_post_stop_states: rc.include_post_stop_states.unwrap_or(false),
        acceptance_vote: rc.acceptance_vote.unwrap_or_default(),
        ..ExtractionConfig::kmeans(2, 0)
    };
    cfg.validate()?;
    let traces = collect_activations(&model, &data)?;
    let extraction = extract_from_traces(&model, &traces, &cfg)?;
    let accuracy = dfa_accuracy(&extraction.dfa, &data);

    let dir = rc.out_dir("extract");
    create_dir(&dir)?;
    write_file(&dir.join("dfa.txt"), extraction.dfa.to_text())?;
    write_file(&dir.join("dfa.dot"), to_dot(&extraction.dfa))?;
    let report = ExtractionReport::new(&cfg, &extraction, Some(accuracy));
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&dir.join("report.json"), json + "\n")?;
    if args.dump_clusters {
        write_clustering_dump(
            &dir.join("clusters.csv"),
            &traces,
            &extraction.clustering,
            cfg.include_post_stop_states,
        )?;
    }
    write_run_config(&dir, &rc)?;
    println!(
        "states {} accuracy {accuracy} silhouette {}",
        extraction.dfa.num_states(),
        extraction
            .diagnostics
            .silhouette
            .map_or_else(|| "none".to_string(), |s| s.to_string())
    );
    println!("{}", dir.display());
    Ok(())
}

fn load_dfa(path: &Path) -> Result<Dfa, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Dfa::from_text(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let data = LabeledDataset::load(&args.data)?;
    let mut out = serde_json::Map::new();
    out.insert("items".into(), data.len().into());
    if let Some(path) = &args.model {
        let (model, _) = SecondOrderRnn::load(path)?;
        out.insert("rnn_accuracy".into(), model.accuracy(&data).into());
    }
    if let Some(path) = &args.dfa {
        let dfa = load_dfa(path)?;
        let acc = dfa_accuracy(&dfa, &data);
        out.insert("dfa_accuracy".into(), acc.into());
        out.insert("correct".into(), (acc == 1.0).into());
        if let Some(g) = args.grammar {
            let truth = ground_truth(dfaforge::GrammarId::new(g)?);
            let eq = equivalent(&dfa, &truth);
            out.insert("equivalent_to_grammar".into(), eq.equal.into());
            if let Some(cx) = eq.counterexample {
                out.insert("counterexample".into(), cx.into());
            }
        }
    }
    println!("{}", serde_json::Value::Object(out));
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let experiment = experiment_for(&args.experiment)?;
    let (experiment, cfg, out) = match args.common.config.as_deref().map(load_sweep_source).transpose()? {
        Some(SweepSource::Manifest(m)) => {
            if m.experiment != experiment {
                return Err(CliError::Usage(format!(
                    "manifest is for {}, not {experiment}",
                    m.experiment
                )));
            }
            (m.experiment, m.config, args.common.out.clone())
        }
        source => {
            let base = match source {
                Some(SweepSource::Run(rc)) => rc,
                _ => RunConfig::default(),
            };
            let mut flags = flag_config(
                "sweep",
                &args.common,
                Some(&args.data),
                Some(&args.model),
                Some(&args.cluster),
            );
            flags.n_values = args.n_values.clone();
            flags.replicates = args.replicates;
            flags.checkpoints = args.checkpoints.clone();
            flags.n_inits = args.n_inits;
            flags.long_hidden = args.long_hidden;
            flags.lengths = args.lengths.clone();
            flags.n_per_length = args.n_per_length;
            flags.attempts = args.attempts;
            flags.long_length = args.long_length;
            flags.long_count = args.long_count;
            let rc = base.overlay(&flags);
            (experiment, rc.sweep_config()?, rc.out)
        }
    };
    cfg.validate(experiment)?;
    let root = out.unwrap_or_else(config::output_root);
    let dir = run_dir(&root, experiment, &cfg);
    let report = run_experiment(experiment, &cfg, args.jobs)?;
    write_report(&report, &dir)?;
    let successes = report.extractions.iter().filter(|e| e.extraction_success).count();
    println!(
        "{experiment}: {} extraction cells, {successes} correct ({:.1}%)",
        report.extractions.len(),
        100.0 * report.success_rate()
    );
    for flag in &report.flags {
        println!("note: {flag}");
    }
    println!("{}", dir.display());
    Ok(())
}

fn dot(args: DotArgs) -> Result<(), CliError> {
    let dfa = match (&args.dfa, args.grammar) {
        (Some(path), _) => load_dfa(path)?,
        (None, Some(g)) => ground_truth(dfaforge::GrammarId::new(g)?),
        (None, None) => return Err(CliError::Usage("pass --dfa or --grammar".into())),
    };
    let text = to_dot(&dfa);
    match &args.out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Extract(a) => extract(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Dot(a) => dot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
