//! Exhaustive matching, used to check the solver on small instances.

use std::collections::BTreeMap;

use super::{
    build_affinity_matrix, candidates_for, AffinityMatrix, Assignment, Candidate, MatchOptions,
    MatcherConfig, NodeRef,
};
use crate::error::{Error, Result};
use crate::graph::AttributeGraph;

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Number of partial injective class-consistent mappings from query locals to database locals.
pub fn count_mappings(q: &AttributeGraph, d: &AttributeGraph) -> u128 {
    let mut per_class: BTreeMap<&str, (u128, u128)> = BTreeMap::new();
    for c in q.class_labels() {
        per_class.entry(c).or_default().0 += 1;
    }
    for c in d.class_labels() {
        if let Some(e) = per_class.get_mut(c) {
            e.1 += 1;
        }
    }
    per_class.values().fold(1u128, |acc, &(a, b)| {
        acc.saturating_mul(partial_injections(a, b))
    })
}

/// `sum_k C(a,k) C(b,k) k!`
fn partial_injections(a: u128, b: u128) -> u128 {
    let mut total = 0u128;
    // term_k = C(a,k) * b!/(b-k)!
    let mut term = 1u128;
    for k in 0..=a.min(b) {
        total = total.saturating_add(term);
        term = term
            .saturating_mul((a - k) * (b - k))
            .checked_div(k + 1)
            .unwrap_or(u128::MAX);
    }
    total
}

struct Search<'a> {
    w: &'a AffinityMatrix,
    /// Candidate indices available to each query local, ascending by database node.
    options: Vec<Vec<usize>>,
    used_db: Vec<bool>,
    chosen: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn gain(&self, c: usize) -> f64 {
        let cross: f64 = self.chosen.iter().map(|&s| self.w.get(c, s)).sum();
        self.w.get(c, c) + 2.0 * cross
    }

    fn run(&mut self, row: usize, value: f64) {
        if row == self.options.len() {
            let better = match &self.best {
                None => true,
                Some((b, _)) => value > b + 1e-12,
            };
            if better {
                self.best = Some((value, self.chosen.clone()));
            }
            return;
        }
        for k in 0..self.options[row].len() {
            let c = self.options[row][k];
            let NodeRef::Local(j) = self.w.candidates[c].db else {
                continue;
            };
            if self.used_db[j] {
                continue;
            }
            let g = self.gain(c);
            self.used_db[j] = true;
            self.chosen.push(c);
            self.run(row + 1, value + g);
            self.chosen.pop();
            self.used_db[j] = false;
        }
        self.run(row + 1, value);
    }
}

/// Exhaustive maximizer of `x^T W x` over all constraint-respecting
/// one-to-one selections. Ties go to the lexicographically smallest
/// selection, with a matched node preferred over leaving it unmatched.
///
/// `cap` bounds the number of mappings enumerated (default
/// [`DEFAULT_ENUMERATION_CAP`]).
pub fn brute_force_match(
    q: &AttributeGraph,
    d: &AttributeGraph,
    wts: &[f64],
    cfg: &MatcherConfig,
    opts: MatchOptions,
    cap: Option<u128>,
) -> Result<(Assignment, f64)> {
    let cap = cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
    let count = count_mappings(q, d);
    if count > cap {
        return Err(Error::EnumerationCap { count, cap });
    }

    let candidates = candidates_for(q, d, opts);
    let w = build_affinity_matrix(q, d, &candidates, wts, cfg, opts.use_edges)?;

    let mut options = vec![Vec::new(); q.num_local()];
    let mut seed = Vec::new();
    for (idx, c) in candidates.iter().enumerate() {
        match c.query {
            NodeRef::Local(i) => options[i].push(idx),
            NodeRef::Global => seed.push(idx),
        }
    }

    let mut search = Search {
        w: &w,
        options,
        used_db: vec![false; d.num_local()],
        chosen: Vec::new(),
        best: None,
    };
    let mut start = 0.0;
    for &g in &seed {
        start += search.gain(g);
        search.chosen.push(g);
    }
    search.run(0, start);

    let (_, picked) = search.best.expect("the empty selection is always feasible");
    let mut pairs: Vec<Candidate> = picked.iter().map(|&i| candidates[i]).collect();
    pairs.sort();
    let objective = w.objective(&pairs);
    let assignment = Assignment {
        pairs,
        soft_scores: Vec::new(),
    };
    Ok((assignment, objective))
}

#[cfg(test)]
mod tests {
    use super::super::test_support::graph;
    use super::*;

    #[test]
    fn partial_injection_counts() {
        assert_eq!(partial_injections(0, 5), 1);
        assert_eq!(partial_injections(1, 3), 4);
        // k=0:1, k=1:4, k=2: C(2,2)*2 = 2
        assert_eq!(partial_injections(2, 2), 7);
        assert_eq!(partial_injections(3, 2), partial_injections(2, 3));
    }

    #[test]
    fn identical_graphs_give_identity() {
        let g = graph(
            "g",
            &[
                ("a", [0., 0., 20., 20.]),
                ("b", [50., 10., 70., 40.]),
                ("c", [10., 60., 90., 95.]),
            ],
        );
        let cfg = MatcherConfig::default();
        let wts = g.weights();
        let (a, obj) =
            brute_force_match(&g, &g, &wts, &cfg, MatchOptions::default(), None).unwrap();
        let identity: Vec<_> = (0..3)
            .map(|i| Candidate::local(i, i))
            .chain([Candidate::GLOBAL])
            .collect();
        assert_eq!(a.pairs, identity);
        // diagonal: weights (sum 1) plus global 1; off-diagonal: 12 ordered pairs of affinity 1
        assert!((obj - 14.0).abs() < 1e-12);
    }

    #[test]
    fn single_candidate_instance() {
        let q = graph("q", &[("car", [0., 0., 10., 10.])]);
        let d = graph("d", &[("bus", [0., 0., 10., 10.])]);
        let cfg = MatcherConfig::default();
        let (a, obj) =
            brute_force_match(&q, &d, &q.weights(), &cfg, MatchOptions::default(), None).unwrap();
        assert_eq!(a.pairs, vec![Candidate::GLOBAL]);
        assert_eq!(obj, 1.0);
    }

    #[test]
    fn cap_refusal_names_the_count() {
        let objs: Vec<(&str, [f64; 4])> = (0..4)
            .map(|k| ("x", [k as f64 * 10., 0., k as f64 * 10. + 5., 5.]))
            .collect();
        let g = graph("g", &objs);
        // sum_k C(4,k)^2 k! = 1 + 16 + 72 + 96 + 24
        assert_eq!(count_mappings(&g, &g), 209);
        let err = brute_force_match(
            &g,
            &g,
            &g.weights(),
            &MatcherConfig::default(),
            MatchOptions::default(),
            Some(100),
        )
        .unwrap_err();
        assert!(err.to_string().contains("209"));
    }
}
