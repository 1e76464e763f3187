use std::fs;
use std::path::{Path, PathBuf};

use agrank::cache::GraphCache;
use agrank::config::RunConfig;
use agrank::eval::{baseline_from_graphs, ndcg_curve, report_csv, RelevanceAnnotations};
use agrank::matcher::{match_graphs, Candidate, ScoreTriple};
use agrank::rank::{precompute_graphs, rank, RankList};
use agrank::synth::{synth_generate, SynthParams};
use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::{
    BuildGraphsArgs, Cli, Command, ConfigArgs, EvaluateArgs, MatchArgs, Method, RankArgs,
    ScoringArgs, SynthArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli.config)?;
    match cli.command {
        Command::BuildGraphs(args) => build_graphs(&mut config, args),
        Command::Rank(args) => rank_queries(&mut config, args),
        Command::Match(args) => match_pair(&mut config, args),
        Command::Evaluate(args) => evaluate(&mut config, args),
        Command::Synth(args) => synth(&mut config, args),
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => {
            RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    for pair in &args.set {
        let (k, v) = pair
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got {pair:?}"))?;
        config.set(k.trim(), v.trim())?;
    }
    Ok(config)
}

fn apply_scoring(config: &mut RunConfig, args: &ScoringArgs) -> Result<()> {
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    if let Some(b) = args.beta {
        config.beta = b;
    }
    if !args.ablation.is_empty() {
        config.set("ablation", &args.ablation.join(","))?;
    }
    config.validate()?;
    Ok(())
}

fn required(
    flag: Option<PathBuf>,
    configured: &mut Option<PathBuf>,
    name: &str,
) -> Result<PathBuf> {
    if let Some(p) = flag {
        *configured = Some(p);
    }
    configured
        .clone()
        .with_context(|| format!("no {name} given (use --{name} or set {name} in the config)"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_cache(path: &Path) -> Result<GraphCache> {
    GraphCache::read(path).with_context(|| format!("reading graph cache {}", path.display()))
}

fn build_graphs(config: &mut RunConfig, args: BuildGraphsArgs) -> Result<()> {
    let manifest = required(args.manifest, &mut config.manifest, "manifest")?;
    let cache = required(args.cache, &mut config.cache, "cache")?;
    if args.binarize.is_some() {
        config.binarize_threshold = args.binarize;
    }
    let n = precompute_graphs(&manifest, &cache, config.binarize_threshold)?;
    println!("{n} graphs written");
    Ok(())
}

/// File name for a query's ranklist; characters outside `[A-Za-z0-9._-]` become `_`.
fn ranklist_file(query_id: &str) -> String {
    let safe: String = query_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.tsv")
}

fn rank_queries(config: &mut RunConfig, args: RankArgs) -> Result<()> {
    apply_scoring(config, &args.scoring)?;
    let cache_path = required(args.cache, &mut config.cache, "cache")?;
    let out = required(args.out, &mut config.out_dir, "out")?;

    let mut queries = args.query;
    if let Some(path) = args.queries_from {
        let qrels = RelevanceAnnotations::read(&path)?;
        queries.extend(qrels.queries().map(str::to_string));
        config.qrels = Some(path);
    }
    let mut seen = std::collections::HashSet::new();
    queries.retain(|q| seen.insert(q.clone()));
    if queries.is_empty() {
        bail!("no queries given (use --query or --queries-from)");
    }

    let cache = read_cache(&cache_path)?;
    let targets = queries
        .iter()
        .map(|q| cache.get(q))
        .collect::<agrank::Result<Vec<_>>>()?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let params = config.rank_params();
    let header = format!("method={} {}", args.method.name(), config.header());
    for query in targets {
        let list = match args.method {
            Method::AttributeGraph => rank(query, cache.graphs.values(), &params, args.threads)?,
            Method::CommonObjects => baseline_from_graphs(query, cache.graphs.values()),
        };
        write(
            &out.join(ranklist_file(&query.image_id)),
            &list.to_tsv(&header),
        )?;
    }
    println!("{} ranklists written to {}", queries.len(), out.display());
    Ok(())
}

/// JSON debug dump of one matching. `soft_scores[i]` belongs to `candidates[i]`.
#[derive(Serialize)]
struct MatchDump<'a> {
    config: String,
    query: &'a str,
    target: &'a str,
    candidates: &'a [Candidate],
    soft_scores: &'a [f64],
    assignment: &'a [Candidate],
    scores: ScoreTriple,
    fused: f64,
    degenerate: bool,
}

fn match_pair(config: &mut RunConfig, args: MatchArgs) -> Result<()> {
    apply_scoring(config, &args.scoring)?;
    let cache_path = required(args.cache, &mut config.cache, "cache")?;
    let cache = read_cache(&cache_path)?;
    let q = cache.get(&args.query)?;
    let d = cache.get(&args.target)?;

    let params = config.rank_params();
    let m = match_graphs(
        q,
        d,
        &params.query_weights(q),
        &params.matcher,
        params.match_options(),
        params.fusion,
    )?;
    let dump = MatchDump {
        config: config.header(),
        query: &q.image_id,
        target: &d.image_id,
        candidates: &m.candidates,
        soft_scores: &m.assignment.soft_scores,
        assignment: &m.assignment.pairs,
        scores: m.scores(),
        fused: m.fused,
        degenerate: m.degenerate,
    };
    let text = serde_json::to_string_pretty(&dump)? + "\n";
    match args.out {
        Some(path) => write(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn evaluate(config: &mut RunConfig, args: EvaluateArgs) -> Result<()> {
    let qrels_path = required(args.qrels, &mut config.qrels, "qrels")?;
    if args.ks.is_empty() || args.ks.contains(&0) {
        bail!("--ks needs positive truncation levels");
    }
    let qrels = RelevanceAnnotations::read(&qrels_path)?;

    let mut files: Vec<PathBuf> = fs::read_dir(&args.ranklists)
        .with_context(|| format!("reading {}", args.ranklists.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "tsv"));
    files.sort();
    if files.is_empty() {
        bail!("no .tsv ranklists in {}", args.ranklists.display());
    }

    let mut curves = Vec::new();
    let mut run_header = None;
    for path in &files {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let (list, header) = RankList::from_tsv(&text, path)?;
        if qrels.for_query(&list.query_id).is_none() {
            log::warn!("query {:?} has no relevance judgments", list.query_id);
        }
        match &run_header {
            None => run_header = Some(header),
            Some(h) if *h != header => {
                log::warn!(
                    "{} was produced with a different configuration",
                    path.display()
                )
            }
            Some(_) => {}
        }
        let curve = ndcg_curve(&list, &qrels, &args.ks);
        if curve.unannotated > 0 {
            log::warn!(
                "query {:?}: {} unannotated images in the top {} treated as irrelevant",
                list.query_id,
                curve.unannotated,
                args.ks.iter().max().unwrap()
            );
        }
        curves.push(curve);
    }

    let ks = args
        .ks
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",");
    let header = format!("ks={ks} {}", run_header.unwrap_or_default());
    let report = report_csv(&curves, &args.ks, header.trim_end());
    match args.out {
        Some(path) => write(&path, &report),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn synth(config: &mut RunConfig, args: SynthArgs) -> Result<()> {
    let out = required(args.out, &mut config.out_dir, "out")?;
    let defaults = SynthParams::default();
    let params = SynthParams {
        seed: args.seed,
        num_images: args.num_images,
        num_classes: args.num_classes,
        max_objects: args.max_objects,
        ladder: if args.rung.is_empty() {
            defaults.ladder
        } else {
            args.rung
        },
        local_dim: args.local_dim,
        global_dim: args.global_dim,
    };
    let ds = synth_generate(&params)?;

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write(
        &out.join("manifest.json"),
        &agrank::scene::serialize_manifest(&ds.manifest),
    )?;
    let qrels = format!(
        "# synth {}\n{}",
        serde_json::to_string(&params)?,
        ds.annotations.to_tsv()
    );
    write(&out.join("qrels.tsv"), &qrels)?;
    println!(
        "{} images and {} queries written to {}",
        ds.manifest.images.len(),
        ds.queries.len(),
        out.display()
    );
    Ok(())
}
