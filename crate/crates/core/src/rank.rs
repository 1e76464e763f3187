//! Query-against-database ranking.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{CacheHeader, GraphCache};
use crate::error::{Error, Result};
use crate::graph::{build_graph, AttributeGraph};
use crate::matcher::{match_graphs, Fusion, MatchOptions, MatcherConfig};
use crate::scene::parse_manifest;

pub use crate::matcher::combine_score;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Remove the global node and its edges from matching; `s_gbl` is 0.
    DropGlobalNode,
    /// Zero every edge affinity; `s_edge` is 0.
    DropEdges,
    /// Uniform query weights `1/N` instead of area-proportional ones.
    DropWeights,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [
        Ablation::DropGlobalNode,
        Ablation::DropEdges,
        Ablation::DropWeights,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Ablation::DropGlobalNode => "drop_global_node",
            Ablation::DropEdges => "drop_edges",
            Ablation::DropWeights => "drop_weights",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown ablation {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankParams {
    pub fusion: Fusion,
    pub matcher: MatcherConfig,
    pub ablation: BTreeSet<Ablation>,
}

impl RankParams {
    pub fn with_ablation(mut self, a: Ablation) -> Self {
        self.ablation.insert(a);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.fusion.validate()?;
        self.matcher.validate()
    }

    pub fn match_options(&self) -> MatchOptions {
        MatchOptions {
            use_global: !self.ablation.contains(&Ablation::DropGlobalNode),
            use_edges: !self.ablation.contains(&Ablation::DropEdges),
        }
    }

    /// Importance weights of the query's local nodes under these parameters.
    pub fn query_weights(&self, query: &AttributeGraph) -> Vec<f64> {
        let n = query.num_local();
        if self.ablation.contains(&Ablation::DropWeights) {
            vec![1.0 / n as f64; n]
        } else {
            query.weights()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub image_id: String,
    pub fused: f64,
    pub s_lcl: f64,
    pub s_gbl: f64,
    pub s_edge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankList {
    pub query_id: String,
    pub entries: Vec<RankEntry>,
}

fn rank_order(a: &RankEntry, b: &RankEntry) -> Ordering {
    b.fused
        .total_cmp(&a.fused)
        .then_with(|| a.image_id.cmp(&b.image_id))
}

impl RankList {
    /// Sorts by fused score, descending, with ties broken by ascending image id.
    pub fn new(query_id: impl Into<String>, mut entries: Vec<RankEntry>) -> Self {
        entries.sort_by(rank_order);
        RankList {
            query_id: query_id.into(),
            entries,
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.image_id.as_str())
    }

    /// 1-based rank of an image.
    pub fn position(&self, image_id: &str) -> Option<usize> {
        self.ids().position(|id| id == image_id).map(|p| p + 1)
    }

    /// Tab-separated ranklist. `header` is appended after `# query=<id>` on the first line.
    pub fn to_tsv(&self, header: &str) -> String {
        let mut out = format!("# query={}", self.query_id);
        if !header.is_empty() {
            out.push(' ');
            out.push_str(header);
        }
        out.push('\n');
        for (k, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                k + 1,
                e.image_id,
                e.fused,
                e.s_lcl,
                e.s_gbl,
                e.s_edge
            ));
        }
        out
    }

    /// Parses a ranklist written by [`RankList::to_tsv`]. Returns the list and
    /// the header text following the query id.
    pub fn from_tsv(text: &str, source: &Path) -> Result<(RankList, String)> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| err(1, "empty ranklist".into()))?;
        let rest = first
            .strip_prefix("# query=")
            .ok_or_else(|| err(1, "missing '# query=' header".into()))?;
        let (query_id, header) = rest.split_once(' ').unwrap_or((rest, ""));

        let mut entries = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 6 {
                return Err(err(
                    n + 1,
                    format!("expected 6 columns, found {}", cols.len()),
                ));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| err(n + 1, format!("bad number {s:?}: {e}")))
            };
            entries.push(RankEntry {
                image_id: cols[1].to_string(),
                fused: num(cols[2])?,
                s_lcl: num(cols[3])?,
                s_gbl: num(cols[4])?,
                s_edge: num(cols[5])?,
            });
        }
        Ok((
            RankList {
                query_id: query_id.to_string(),
                entries,
            },
            header.to_string(),
        ))
    }
}

fn score_one(
    query: &AttributeGraph,
    wts: &[f64],
    db: &AttributeGraph,
    params: &RankParams,
) -> Result<RankEntry> {
    let r = match_graphs(
        query,
        db,
        wts,
        &params.matcher,
        params.match_options(),
        params.fusion,
    )?;
    Ok(RankEntry {
        image_id: db.image_id.clone(),
        fused: r.fused,
        s_lcl: r.s_lcl,
        s_gbl: r.s_gbl,
        s_edge: r.s_edge,
    })
}

/// Matches `query` against every database graph and sorts by fused score.
///
/// `threads` caps the worker count; `Some(1)` runs on the calling thread.
/// The result does not depend on the thread count.
pub fn rank<'a, I>(
    query: &AttributeGraph,
    database: I,
    params: &RankParams,
    threads: Option<usize>,
) -> Result<RankList>
where
    I: IntoIterator<Item = &'a AttributeGraph>,
{
    params.validate()?;
    let db: Vec<&AttributeGraph> = database.into_iter().collect();
    if db.is_empty() {
        log::warn!("empty database; ranklist for {:?} is empty", query.image_id);
        return Ok(RankList::new(query.image_id.clone(), Vec::new()));
    }
    let wts = params.query_weights(query);

    let entries: Result<Vec<RankEntry>> = match threads {
        Some(1) => db
            .iter()
            .map(|g| score_one(query, &wts, g, params))
            .collect(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            pool.install(|| {
                db.par_iter()
                    .map(|g| score_one(query, &wts, g, params))
                    .collect()
            })
        }
        None => db
            .par_iter()
            .map(|g| score_one(query, &wts, g, params))
            .collect(),
    };
    Ok(RankList::new(query.image_id.clone(), entries?))
}

/// Builds a graph for every record of a manifest and writes the cache.
/// Returns the number of graphs written.
pub fn precompute_graphs(
    manifest: impl AsRef<Path>,
    cache: impl AsRef<Path>,
    binarize_threshold: Option<f64>,
) -> Result<usize> {
    let mut m = parse_manifest(manifest)?;
    if let Some(t) = binarize_threshold {
        m.binarize(t);
    }
    let mut out = GraphCache::new(CacheHeader::new(m.dims(), binarize_threshold));
    for g in m.images.par_iter().map(build_graph).collect::<Vec<_>>() {
        out.insert(g);
    }
    out.write(cache)?;
    Ok(out.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, fused: f64) -> RankEntry {
        RankEntry {
            image_id: id.into(),
            fused,
            s_lcl: fused,
            s_gbl: 0.0,
            s_edge: 0.0,
        }
    }

    #[test]
    fn ties_break_by_image_id() {
        let l = RankList::new("q", vec![entry("c", 0.5), entry("b", 0.9), entry("a", 0.5)]);
        let ids: Vec<_> = l.ids().collect();
        assert_eq!(ids, ["b", "a", "c"]);
        assert_eq!(l.position("c"), Some(3));
    }

    #[test]
    fn tsv_round_trip() {
        let l = RankList::new("q", vec![entry("x", 0.1 + 0.2), entry("y", 1.0 / 3.0)]);
        let text = l.to_tsv("alpha=0.4 beta=0.4");
        assert!(text.starts_with("# query=q alpha=0.4 beta=0.4\n1\ty\t"));
        let (back, header) = RankList::from_tsv(&text, Path::new("t.tsv")).unwrap();
        assert_eq!(back, l);
        assert_eq!(header, "alpha=0.4 beta=0.4");
    }

    #[test]
    fn ablation_names_parse() {
        for a in Ablation::ALL {
            assert_eq!(a.as_str().parse::<Ablation>().unwrap(), a);
        }
        assert!("drop_nodes".parse::<Ablation>().is_err());
    }

    #[test]
    fn empty_database_gives_empty_list() {
        let q = crate::matcher::test_support::graph("q", &[("a", [0., 0., 5., 5.])]);
        let l = rank(&q, std::iter::empty(), &RankParams::default(), None).unwrap();
        assert!(l.entries.is_empty());
        assert_eq!(l.query_id, "q");
    }
}
