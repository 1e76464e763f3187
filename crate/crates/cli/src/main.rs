mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use agrank::config::CONFIG_ENV;
use agrank::synth::Perturbation;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "agrank", version, about = "Attribute-Graph image ranking")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

/// Configuration sources shared by every subcommand. Later sources win:
/// built-in defaults, the config file, `--set` pairs, then dedicated flags.
#[derive(Args)]
struct ConfigArgs {
    /// TOML file of `key = value` settings
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one setting; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build Attribute-Graphs for every image of a manifest and write the graph cache
    BuildGraphs(BuildGraphsArgs),
    /// Rank the cached database against one or more queries
    Rank(RankArgs),
    /// Dump the matching of one query/target pair as JSON
    Match(MatchArgs),
    /// Score ranklists against relevance judgments with nDCG@k
    Evaluate(EvaluateArgs),
    /// Generate a seeded synthetic manifest with relevance judgments
    Synth(SynthArgs),
}

#[derive(Args)]
struct BuildGraphsArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Threshold attribute scores to 0/1 before building graphs
    #[arg(long, value_name = "T")]
    binarize: Option<f64>,
}

#[derive(Args)]
struct ScoringArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// drop_global_node, drop_edges or drop_weights; repeatable
    #[arg(long)]
    ablation: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    AttributeGraph,
    CommonObjects,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::AttributeGraph => "attribute-graph",
            Method::CommonObjects => "common-objects",
        }
    }
}

#[derive(Args)]
struct RankArgs {
    /// Query image id; repeatable
    #[arg(long)]
    query: Vec<String>,
    /// Rank every query listed in this qrels file
    #[arg(long, value_name = "QRELS")]
    queries_from: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Output directory; one `<query>.tsv` per query
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "attribute-graph")]
    method: Method,
    /// Worker thread cap; results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    query: String,
    #[arg(long)]
    target: String,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of `.tsv` ranklists
    #[arg(long)]
    ranklists: PathBuf,
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    ks: Vec<usize>,
    /// Output CSV; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for manifest.json and qrels.tsv
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Number of base scenes; each is a query with one copy per rung
    #[arg(long, default_value_t = 50)]
    num_images: usize,
    #[arg(long, default_value_t = 8)]
    num_classes: usize,
    #[arg(long, default_value_t = 5)]
    max_objects: usize,
    #[arg(long, default_value_t = agrank::scene::DEFAULT_LOCAL_DIM)]
    local_dim: usize,
    #[arg(long, default_value_t = agrank::scene::DEFAULT_GLOBAL_DIM)]
    global_dim: usize,
    /// Perturbation rung `NOISE,JITTER,DROP`; repeatable, replaces the default ladder
    #[arg(long, value_parser = parse_rung, allow_hyphen_values = true)]
    rung: Vec<Perturbation>,
}

fn parse_rung(s: &str) -> Result<Perturbation, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [attr_noise, jitter, drop_prob] = parts[..] else {
        return Err("expected NOISE,JITTER,DROP".into());
    };
    let rung = Perturbation {
        attr_noise,
        jitter,
        drop_prob,
    };
    rung.validate().map_err(|e| e.to_string())?;
    Ok(rung)
}

/// The error and its causes joined by `: `, skipping causes already quoted
/// by the message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg.push_str(": ");
            msg.push_str(&c);
        }
    }
    msg
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
