//! Constrained graph matching between two Attribute-Graphs.
//!
//! Candidate correspondences are node pairs that respect the class
//! constraint (local to local of the same class, global to global). They
//! become the nodes of an association graph whose affinity matrix is solved
//! with reweighted random walks, then discretized into a one-to-one
//! assignment. The assignment is scored separately over local nodes, the
//! global node, and edges.

mod affinity;
mod assign;
mod oracle;
mod rrwm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeGraph, EdgeFeature, EdgeKind};

pub use affinity::{build_affinity_matrix, AffinityMatrix};
pub use assign::{discretize, Assignment};
pub use oracle::{brute_force_match, count_mappings, DEFAULT_ENUMERATION_CAP};
pub use rrwm::{rrwm_solve, SoftScores};

/// A node of either graph: a local node index or the global node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRef {
    Local(usize),
    Global,
}

/// A candidate correspondence `query node -> database node`.
///
/// Ordered lexicographically by `(query, db)`; local nodes sort before the global node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub query: NodeRef,
    pub db: NodeRef,
}

impl Candidate {
    pub const GLOBAL: Candidate = Candidate {
        query: NodeRef::Global,
        db: NodeRef::Global,
    };

    pub fn local(query: usize, db: usize) -> Self {
        Candidate {
            query: NodeRef::Local(query),
            db: NodeRef::Local(db),
        }
    }

    pub fn is_global(&self) -> bool {
        self.query == NodeRef::Global
    }

    pub fn conflicts_with(&self, other: &Candidate) -> bool {
        self.query == other.query || self.db == other.db
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum NodeAffinity {
    Cosine,
    Rbf { sigma: f64 },
}

/// Affinity bandwidths and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub node_affinity: NodeAffinity,
    pub sigma_mu: f64,
    /// Degrees.
    pub sigma_theta: f64,
    pub sigma_o: f64,
    pub sigma_area: f64,
    pub rw_mix: f64,
    pub reweight_strength: f64,
    pub sinkhorn_iters: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            node_affinity: NodeAffinity::Cosine,
            sigma_mu: 0.2,
            sigma_theta: 30.0,
            sigma_o: 0.2,
            sigma_area: 0.15,
            rw_mix: 0.2,
            reweight_strength: 30.0,
            sinkhorn_iters: 20,
            max_iters: 300,
            tol: 1e-6,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_mu", self.sigma_mu),
            ("sigma_theta", self.sigma_theta),
            ("sigma_o", self.sigma_o),
            ("sigma_area", self.sigma_area),
            ("reweight_strength", self.reweight_strength),
            ("tol", self.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if let NodeAffinity::Rbf { sigma } = self.node_affinity {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "rbf sigma must be positive, got {sigma}"
                )));
            }
        }
        if !(self.rw_mix > 0.0 && self.rw_mix < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rw_mix must lie in (0, 1), got {}",
                self.rw_mix
            )));
        }
        if self.sinkhorn_iters == 0 || self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "sinkhorn_iters and max_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Which parts of the graphs take part in matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchOptions {
    pub use_global: bool,
    pub use_edges: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            use_global: true,
            use_edges: true,
        }
    }
}

/// Score fusion weights; the edge term receives `1 - alpha - beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fusion {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Fusion {
    fn default() -> Self {
        Fusion {
            alpha: 0.4,
            beta: 0.4,
        }
    }
}

impl Fusion {
    pub fn validate(&self) -> Result<()> {
        let Fusion { alpha, beta } = *self;
        if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need alpha >= 0, beta >= 0, alpha + beta <= 1 (got {alpha}, {beta})"
            )));
        }
        Ok(())
    }
}

pub fn combine_score(s_lcl: f64, s_gbl: f64, s_edge: f64, alpha: f64, beta: f64) -> f64 {
    alpha * s_lcl + beta * s_gbl + (1.0 - alpha - beta) * s_edge
}

/// Local, global and edge scores of one matching.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub s_lcl: f64,
    pub s_gbl: f64,
    pub s_edge: f64,
}

impl ScoreTriple {
    pub fn fuse(&self, fusion: Fusion) -> f64 {
        combine_score(
            self.s_lcl,
            self.s_gbl,
            self.s_edge,
            fusion.alpha,
            fusion.beta,
        )
        .clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub candidates: Vec<Candidate>,
    pub assignment: Assignment,
    pub s_lcl: f64,
    pub s_gbl: f64,
    pub s_edge: f64,
    pub fused: f64,
    /// Set when the affinity matrix was entirely zero and the solver fell back to uniform scores.
    pub degenerate: bool,
}

impl MatchResult {
    pub fn scores(&self) -> ScoreTriple {
        ScoreTriple {
            s_lcl: self.s_lcl,
            s_gbl: self.s_gbl,
            s_edge: self.s_edge,
        }
    }
}

/// All class-consistent local pairs in `(query, db)` order, followed by the global pair.
pub fn candidate_correspondences(q: &AttributeGraph, d: &AttributeGraph) -> Vec<Candidate> {
    let mut out = Vec::new();
    for qn in &q.local_nodes {
        for dn in &d.local_nodes {
            if qn.class_label == dn.class_label {
                out.push(Candidate::local(qn.index, dn.index));
            }
        }
    }
    out.push(Candidate::GLOBAL);
    out
}

pub(crate) fn candidates_for(
    q: &AttributeGraph,
    d: &AttributeGraph,
    opts: MatchOptions,
) -> Vec<Candidate> {
    let mut c = candidate_correspondences(q, d);
    if !opts.use_global {
        c.retain(|c| !c.is_global());
    }
    c
}

/// Similarity of two attribute vectors in `[0, 1]`.
pub fn node_affinity(a: &[f64], b: &[f64], mode: NodeAffinity) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::AttributeLengthMismatch(a.len(), b.len()));
    }
    let value = match mode {
        NodeAffinity::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum();
            let nb: f64 = b.iter().map(|x| x * x).sum();
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                dot / (na * nb).sqrt()
            }
        }
        NodeAffinity::Rbf { sigma } => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-d2 / (2.0 * sigma * sigma)).exp()
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Product of Gaussian kernels on the differences of the three edge features.
/// Edges of different kinds have affinity 0.
pub fn edge_affinity(e: &EdgeFeature, f: &EdgeFeature, cfg: &MatcherConfig) -> f64 {
    if e.kind != f.kind {
        return 0.0;
    }
    let sigma_third = match e.kind {
        EdgeKind::Local => cfg.sigma_o,
        EdgeKind::Global => cfg.sigma_area,
    };
    let g = |delta: f64, sigma: f64| -delta * delta / (2.0 * sigma * sigma);
    (g(e.mu - f.mu, cfg.sigma_mu)
        + g(e.theta - f.theta, cfg.sigma_theta)
        + g(e.third - f.third, sigma_third))
    .exp()
}

/// The edge of `g` joining two nodes, if there is one.
pub(crate) fn edge_between(g: &AttributeGraph, a: NodeRef, b: NodeRef) -> Option<&EdgeFeature> {
    match (a, b) {
        (NodeRef::Local(i), NodeRef::Local(j)) => g.local_edge(i, j),
        (NodeRef::Local(i), NodeRef::Global) | (NodeRef::Global, NodeRef::Local(i)) => {
            g.global_edge(i)
        }
        (NodeRef::Global, NodeRef::Global) => None,
    }
}

/// Splits the quality of an assignment into local-node, global-node and edge scores.
///
/// Unmatched query nodes and edges contribute nothing; the edge score is
/// normalized by the number of query edges taking part in matching.
pub fn decompose_scores(
    assignment: &Assignment,
    q: &AttributeGraph,
    d: &AttributeGraph,
    wts: &[f64],
    cfg: &MatcherConfig,
    opts: MatchOptions,
) -> Result<ScoreTriple> {
    let mut mapping: Vec<Option<usize>> = vec![None; q.num_local()];
    for pair in &assignment.pairs {
        if let (NodeRef::Local(i), NodeRef::Local(j)) = (pair.query, pair.db) {
            mapping[i] = Some(j);
        }
    }

    let mut s_lcl = 0.0;
    for (i, m) in mapping.iter().enumerate() {
        if let Some(j) = *m {
            let a = node_affinity(
                &q.local_nodes[i].attributes,
                &d.local_nodes[j].attributes,
                cfg.node_affinity,
            )?;
            s_lcl += wts.get(i).copied().unwrap_or(0.0) * a;
        }
    }

    let s_gbl = if opts.use_global {
        node_affinity(
            &q.global_node.attributes,
            &d.global_node.attributes,
            cfg.node_affinity,
        )?
    } else {
        0.0
    };

    let mut s_edge = 0.0;
    if opts.use_edges {
        let mut total = q.local_edges.len();
        let mut sum = 0.0;
        for e in &q.local_edges {
            if let (Some(a), Some(b)) = (mapping[e.i], mapping[e.j]) {
                if let Some(f) = d.local_edge(a, b) {
                    sum += edge_affinity(&e.feature, f, cfg);
                }
            }
        }
        if opts.use_global {
            total += q.global_edges.len();
            for (i, e) in q.global_edges.iter().enumerate() {
                if let Some(f) = mapping[i].and_then(|j| d.global_edge(j)) {
                    sum += edge_affinity(e, f, cfg);
                }
            }
        }
        if total > 0 {
            s_edge = sum / total as f64;
        }
    }

    Ok(ScoreTriple {
        s_lcl: s_lcl.clamp(0.0, 1.0),
        s_gbl,
        s_edge: s_edge.clamp(0.0, 1.0),
    })
}

/// Full matching pipeline for one query/database pair.
pub fn match_graphs(
    q: &AttributeGraph,
    d: &AttributeGraph,
    wts: &[f64],
    cfg: &MatcherConfig,
    opts: MatchOptions,
    fusion: Fusion,
) -> Result<MatchResult> {
    let candidates = candidates_for(q, d, opts);
    let w = build_affinity_matrix(q, d, &candidates, wts, cfg, opts.use_edges)?;
    let soft = rrwm_solve(&w, cfg);
    let assignment = discretize(&soft.scores, &candidates);
    let triple = decompose_scores(&assignment, q, d, wts, cfg, opts)?;
    Ok(MatchResult {
        candidates,
        assignment,
        s_lcl: triple.s_lcl,
        s_gbl: triple.s_gbl,
        s_edge: triple.s_edge,
        fused: triple.fuse(fusion),
        degenerate: soft.degenerate,
    })
}
