use serde::Serialize;

use super::{edge_affinity, edge_between, node_affinity, Candidate, MatcherConfig, NodeRef};
use crate::error::Result;
use crate::graph::AttributeGraph;

/// Symmetric affinity matrix over candidate correspondences.
///
/// The diagonal holds node affinities (local candidates scaled by the query
/// node's importance weight); off-diagonal entries hold the affinity between
/// the query edge and the database edge implied by a pair of candidates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinityMatrix {
    pub candidates: Vec<Candidate>,
    /// Row-major `M x M`.
    values: Vec<f64>,
}

impl AffinityMatrix {
    pub fn from_dense(candidates: Vec<Candidate>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), candidates.len() * candidates.len());
        AffinityMatrix { candidates, values }
    }

    pub fn size(&self) -> usize {
        self.candidates.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.size() + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        let m = self.size();
        &self.values[a * m..(a + 1) * m]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn is_symmetric(&self) -> bool {
        let m = self.size();
        (0..m).all(|a| (0..a).all(|b| self.get(a, b) == self.get(b, a)))
    }

    /// Position of a candidate; candidate lists are sorted.
    pub fn index_of(&self, c: &Candidate) -> Option<usize> {
        self.candidates.binary_search(c).ok()
    }

    /// `x^T W x` for the indicator vector of `selected`.
    ///
    /// Summed over the selected indices in ascending order so that equal
    /// selections always produce bit-identical objectives.
    pub fn objective(&self, selected: &[Candidate]) -> f64 {
        let mut idx: Vec<usize> = selected.iter().filter_map(|c| self.index_of(c)).collect();
        idx.sort_unstable();
        idx.dedup();
        let mut total = 0.0;
        for &a in &idx {
            for &b in &idx {
                total += self.get(a, b);
            }
        }
        total
    }
}

pub fn build_affinity_matrix(
    q: &AttributeGraph,
    d: &AttributeGraph,
    candidates: &[Candidate],
    wts: &[f64],
    cfg: &MatcherConfig,
    use_edges: bool,
) -> Result<AffinityMatrix> {
    let m = candidates.len();
    let mut values = vec![0.0; m * m];
    for (a, c) in candidates.iter().enumerate() {
        values[a * m + a] = match (c.query, c.db) {
            (NodeRef::Local(i), NodeRef::Local(j)) => {
                let w = wts.get(i).copied().unwrap_or(0.0);
                w * node_affinity(
                    &q.local_nodes[i].attributes,
                    &d.local_nodes[j].attributes,
                    cfg.node_affinity,
                )?
            }
            (NodeRef::Global, NodeRef::Global) => node_affinity(
                &q.global_node.attributes,
                &d.global_node.attributes,
                cfg.node_affinity,
            )?,
            _ => 0.0,
        };
    }
    if use_edges {
        for a in 0..m {
            for b in a + 1..m {
                let (ca, cb) = (&candidates[a], &candidates[b]);
                if ca.conflicts_with(cb) {
                    continue;
                }
                let eq = edge_between(q, ca.query, cb.query);
                let ed = edge_between(d, ca.db, cb.db);
                if let (Some(e), Some(f)) = (eq, ed) {
                    let v = edge_affinity(e, f, cfg);
                    values[a * m + b] = v;
                    values[b * m + a] = v;
                }
            }
        }
    }
    Ok(AffinityMatrix {
        candidates: candidates.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::graph;
    use super::super::{candidate_correspondences, Candidate};
    use super::*;

    #[test]
    fn self_match_diagonal_is_weights_and_one() {
        let g = graph(
            "g",
            &[
                ("a", [0., 0., 20., 20.]),
                ("b", [50., 10., 70., 40.]),
                ("c", [10., 60., 90., 95.]),
            ],
        );
        let c = candidate_correspondences(&g, &g);
        let wts = g.weights();
        let w = build_affinity_matrix(&g, &g, &c, &wts, &MatcherConfig::default(), true).unwrap();
        for (i, wt) in wts.iter().enumerate() {
            assert!((w.get(i, i) - wt).abs() < 1e-15);
        }
        assert_eq!(w.get(3, 3), 1.0);
        assert!(w.is_symmetric());
        // identical edges everywhere off the diagonal
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert_eq!(w.get(a, b), 1.0);
                }
            }
        }
    }

    #[test]
    fn conflicting_candidates_have_zero_affinity() {
        let q = graph(
            "q",
            &[("dog", [0., 0., 10., 10.]), ("cat", [40., 40., 60., 60.])],
        );
        let d = graph(
            "d",
            &[
                ("dog", [0., 0., 10., 10.]),
                ("dog", [30., 0., 40., 10.]),
                ("cat", [40., 40., 60., 60.]),
            ],
        );
        let c = candidate_correspondences(&q, &d);
        assert_eq!(
            c,
            vec![
                Candidate::local(0, 0),
                Candidate::local(0, 1),
                Candidate::local(1, 2),
                Candidate::GLOBAL
            ]
        );
        let w = build_affinity_matrix(&q, &d, &c, &q.weights(), &MatcherConfig::default(), true)
            .unwrap();
        assert_eq!(w.get(0, 1), 0.0);
        assert!(w.get(0, 2) > 0.0);
        assert!(w.get(0, 3) > 0.0);
        assert!(w.is_symmetric());
    }

    #[test]
    fn mismatched_edge_kinds_give_zero() {
        // A hand-built candidate list pairing a local query node with the database
        // global node: the query edge is local-local, the database edge local-global.
        let q = graph(
            "q",
            &[("a", [0., 0., 10., 10.]), ("b", [40., 40., 60., 60.])],
        );
        let d = graph(
            "d",
            &[("a", [0., 0., 10., 10.]), ("b", [40., 40., 60., 60.])],
        );
        let c = vec![
            Candidate::local(0, 0),
            Candidate {
                query: NodeRef::Local(1),
                db: NodeRef::Global,
            },
        ];
        let w = build_affinity_matrix(&q, &d, &c, &q.weights(), &MatcherConfig::default(), true)
            .unwrap();
        assert_eq!(w.get(0, 1), 0.0);
        assert_eq!(w.get(1, 1), 0.0);
    }

    #[test]
    fn objective_counts_both_orders() {
        let c = vec![Candidate::local(0, 0), Candidate::GLOBAL];
        let w = AffinityMatrix::from_dense(c.clone(), vec![0.5, 0.25, 0.25, 1.0]);
        assert_eq!(w.objective(&c), 2.0);
        assert_eq!(w.objective(&c[..1]), 0.5);
    }
}
