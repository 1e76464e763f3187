use std::collections::BTreeSet;

use serde::Serialize;

use super::{Candidate, NodeRef};

/// Scores closer than this to the optimum count as ties.
const TIE_EPS: f64 = 1e-12;

/// A one-to-one, class-consistent selection of candidates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    /// Selected candidates in lexicographic order.
    pub pairs: Vec<Candidate>,
    /// Pre-discretization score of every candidate, in candidate order.
    pub soft_scores: Vec<f64>,
}

impl Assignment {
    pub fn is_one_to_one(&self) -> bool {
        let mut q = BTreeSet::new();
        let mut d = BTreeSet::new();
        self.pairs
            .iter()
            .all(|c| q.insert(c.query) && d.insert(c.db))
    }
}

/// Minimum-cost perfect assignment on a square matrix (Hungarian method).
/// Returns the column chosen for each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Best total weight of a partial one-to-one matching over `rows x cols`,
/// where `weight[r][c]` is `None` for forbidden cells.
fn best_value(weight: &[Vec<Option<f64>>], rows: &[usize], cols: &[usize]) -> f64 {
    let n = rows.len().max(cols.len());
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    // Forbidden and padding cells weigh 0, which is the same as leaving a row unmatched.
    let mut cost = vec![vec![0.0; n]; n];
    for (a, &r) in rows.iter().enumerate() {
        for (b, &c) in cols.iter().enumerate() {
            if let Some(w) = weight[r][c] {
                cost[a][b] = -w;
            }
        }
    }
    let pick = hungarian(&cost);
    rows.iter()
        .enumerate()
        .filter_map(|(a, &r)| cols.get(pick[a]).and_then(|&c| weight[r][c]))
        .sum()
}

/// Maximum-weight one-to-one selection of local candidates using `scores` as
/// weights. Among optimal selections the lexicographically smallest is taken:
/// query nodes in ascending order each receive the lowest database index that
/// still admits an optimum, and are left unmatched only when none does. The
/// global candidate, when present, is always selected.
pub fn discretize(scores: &[f64], candidates: &[Candidate]) -> Assignment {
    let mut qs = BTreeSet::new();
    let mut ds = BTreeSet::new();
    for c in candidates {
        if let (NodeRef::Local(i), NodeRef::Local(j)) = (c.query, c.db) {
            qs.insert(i);
            ds.insert(j);
        }
    }
    let qs: Vec<usize> = qs.into_iter().collect();
    let ds: Vec<usize> = ds.into_iter().collect();
    let mut weight = vec![vec![None; ds.len()]; qs.len()];
    for (c, &s) in candidates.iter().zip(scores) {
        if let (NodeRef::Local(i), NodeRef::Local(j)) = (c.query, c.db) {
            let r = qs.binary_search(&i).unwrap();
            let k = ds.binary_search(&j).unwrap();
            weight[r][k] = Some(s.max(0.0));
        }
    }

    let mut free_rows: Vec<usize> = (0..qs.len()).collect();
    let mut free_cols: Vec<usize> = (0..ds.len()).collect();
    let mut target = best_value(&weight, &free_rows, &free_cols);
    let mut pairs = Vec::new();

    while !free_rows.is_empty() {
        let r = free_rows.remove(0);
        let mut chosen = None;
        for (pos, &c) in free_cols.iter().enumerate() {
            let Some(w) = weight[r][c] else { continue };
            let mut rest_cols = free_cols.clone();
            rest_cols.remove(pos);
            let value = w + best_value(&weight, &free_rows, &rest_cols);
            if value >= target - TIE_EPS {
                chosen = Some((pos, value - w));
                break;
            }
        }
        if let Some((pos, rest)) = chosen {
            let c = free_cols.remove(pos);
            pairs.push(Candidate::local(qs[r], ds[c]));
            target = rest;
        }
    }

    if candidates.contains(&Candidate::GLOBAL) {
        pairs.push(Candidate::GLOBAL);
    }
    pairs.sort();
    Assignment {
        pairs,
        soft_scores: scores.to_vec(),
    }
}
