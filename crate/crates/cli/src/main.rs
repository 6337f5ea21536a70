//! Batch front-end: validate corpora, generate synthetic ones, run the
//! scoring pipeline, and extract plot-ready series from score reports.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linkgauge::corpus::{ingest_tweets, load_social_graph, UserId};
use linkgauge::graph::ModelKind;
use linkgauge::pipeline::{emit_plot_data, load_scores_json, run, PipelineConfig};
use linkgauge::synth::SynthConfig;
use linkgauge::Error;

#[derive(Parser)]
#[command(
    name = "linkgauge",
    version,
    about = "Predict social links from microblog content and score the match"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a tweet file (and optionally a follower file) and print
    /// ingest statistics as JSON.
    Ingest {
        /// Tab-separated records: tweet_id, user_id, hashtags, text.
        tweets: PathBuf,
        /// Optional follower pairs to validate against the same users.
        #[arg(long)]
        social: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with planted communities.
    Synth {
        /// JSON file holding generator settings; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for tweets.tsv, social.tsv, and planted.tsv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full scoring pipeline.
    Run(RunArgs),
    /// Regroup a scores.json into per-series TSV files for plotting.
    Plotdata {
        /// scores.json written by `run`.
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with pipeline settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tweets: Option<PathBuf>,
    #[arg(long)]
    social: Option<PathBuf>,
    /// Comma-separated subset of unigram,bigram,lda.
    #[arg(long, value_delimiter = ',')]
    models: Vec<ModelKind>,
    /// Comma-separated retention percentages.
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write scores, partitions, and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip per-topic subgraph scoring.
    #[arg(long)]
    no_topic_scopes: bool,
    #[arg(long)]
    dump_graphs: bool,
    /// One stopword per line (topic-model path only).
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// 1 = configuration problem, 2 = unreadable or malformed input.
fn classify(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidConfig(_) | Error::BadThreshold(_) | Error::VocabTooSmall(_)) => 1,
        Some(_) => 2,
        None => {
            if err.downcast_ref::<serde_json::Error>().is_some() {
                1 // bad config file
            } else {
                2 // io and everything else
            }
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Ingest { tweets, social } => ingest(tweets, social),
        Command::Synth { config, out, seed } => synth(config, out, seed),
        Command::Run(args) => run_pipeline(args),
        Command::Plotdata { scores, out } => {
            let series = load_scores_json(&scores)?;
            let written = emit_plot_data(&series, &out)?;
            eprintln!("wrote {} series under {}", written.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn ingest(tweets: PathBuf, social: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&tweets)?;
    let (events, report) = ingest_tweets(text.as_bytes())?;
    let mut doc = serde_json::to_value(&report)?;
    if let Some(social) = social {
        let members: BTreeSet<UserId> =
            events.iter().flat_map(|e| e.users().iter().cloned()).collect();
        let social_text = std::fs::read_to_string(&social)?;
        let (_, social_report) = load_social_graph(social_text.as_bytes(), &members)?;
        doc["social"] = serde_json::to_value(&social_report)?;
    }
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &doc)?;
    writeln!(stdout)?;
    Ok(ExitCode::SUCCESS)
}

fn synth(config: Option<PathBuf>, out: PathBuf, seed: Option<u64>) -> anyhow::Result<ExitCode> {
    let mut cfg: SynthConfig = match config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let output = linkgauge::synth::generate(&cfg)?;
    let paths = output.write_to_dir(&out)?;
    eprintln!(
        "wrote {}, {}, {}",
        paths.tweets.display(),
        paths.edges.display(),
        paths.planted.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_pipeline(args: RunArgs) -> anyhow::Result<ExitCode> {
    let mut cfg: PipelineConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(tweets) = args.tweets {
        cfg.tweets = Some(tweets);
        cfg.synth = None;
    }
    if let Some(social) = args.social {
        cfg.social_edges = Some(social);
    }
    if !args.models.is_empty() {
        cfg.models = args.models;
    }
    if !args.thresholds.is_empty() {
        cfg.thresholds = args.thresholds;
    }
    if let Some(topics) = args.topics {
        cfg.topics = topics;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = Some(out);
    }
    if args.no_topic_scopes {
        cfg.topic_scopes = false;
    }
    if args.dump_graphs {
        cfg.dump_graphs = true;
    }
    if let Some(stopwords) = args.stopwords {
        cfg.stopwords_file = Some(stopwords);
    }

    let output = run(&cfg)?;

    let mut stdout = std::io::stdout().lock();
    stdout.write_all(linkgauge::pipeline::scores_to_csv(&output.scores)?.as_bytes())?;
    drop(stdout);

    let manifest = &output.manifest;
    eprintln!(
        "{} cells scored across {} events ({} records, {} follower edges)",
        manifest.cells_scored,
        manifest.events.len(),
        manifest.ingest.parsed_records,
        manifest.social.edges,
    );
    for path in &output.written {
        eprintln!("wrote {}", path.display());
    }
    if manifest.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for failure in &manifest.failures {
            eprintln!(
                "cell failed: event={} scope={} model={} threshold={}: {}",
                failure.event,
                failure.scope.map_or_else(|| "*".into(), |s| s.to_string()),
                failure.model.map_or_else(|| "*".into(), |m| m.to_string()),
                failure.threshold_pct.map_or_else(|| "*".into(), |t| t.to_string()),
                failure.error
            );
        }
        Ok(ExitCode::from(3))
    }
}
