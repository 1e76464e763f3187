//! Reweighted random walks on the association graph.
//!
//! Each step walks on the affinity matrix (scaled by its largest degree)
//! starting from a mix of the current scores and the previous reweighting
//! jump. The jump is the walk result sharpened by exponentiation and pushed
//! towards the one-to-one constraint set by Sinkhorn normalization over the
//! query-node by database-node grid.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{AffinityMatrix, Candidate, MatcherConfig, NodeRef};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoftScores {
    /// One score per candidate, summing to 1.
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The affinity matrix was all zero; scores are uniform.
    pub degenerate: bool,
}

/// Row and column of every candidate on the query-node by database-node grid.
struct Grid {
    row: Vec<usize>,
    col: Vec<usize>,
    rows: usize,
    cols: usize,
}

impl Grid {
    fn new(candidates: &[Candidate]) -> Self {
        fn index(nodes: impl Iterator<Item = NodeRef>) -> (Vec<usize>, usize) {
            let nodes: Vec<_> = nodes.collect();
            let mut ids = BTreeMap::new();
            for n in &nodes {
                let next = ids.len();
                ids.entry(*n).or_insert(next);
            }
            (nodes.iter().map(|n| ids[n]).collect(), ids.len())
        }
        let (row, rows) = index(candidates.iter().map(|c| c.query));
        let (col, cols) = index(candidates.iter().map(|c| c.db));
        Grid {
            row,
            col,
            rows,
            cols,
        }
    }

    fn normalize(&self, y: &mut [f64], by_row: bool) {
        let (slot, n) = if by_row {
            (&self.row, self.rows)
        } else {
            (&self.col, self.cols)
        };
        let mut sums = vec![0.0; n];
        for (v, &s) in y.iter().zip(slot) {
            sums[s] += *v;
        }
        for (v, &s) in y.iter_mut().zip(slot) {
            if sums[s] > 0.0 {
                *v /= sums[s];
            }
        }
    }

    fn sinkhorn(&self, y: &mut [f64], iters: usize) {
        for _ in 0..iters {
            self.normalize(y, true);
            self.normalize(y, false);
        }
    }
}

fn normalize_sum(x: &mut [f64]) {
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
}

pub fn rrwm_solve(w: &AffinityMatrix, cfg: &MatcherConfig) -> SoftScores {
    let m = w.size();
    if m == 0 {
        return SoftScores {
            scores: Vec::new(),
            iterations: 0,
            converged: true,
            degenerate: false,
        };
    }
    let uniform = vec![1.0 / m as f64; m];
    if w.is_zero() {
        return SoftScores {
            scores: uniform,
            iterations: 0,
            converged: true,
            degenerate: true,
        };
    }

    // The walk uses W scaled by its largest degree, which keeps it a power
    // iteration on W rather than a walk towards the degree distribution.
    let max_degree = (0..m)
        .map(|a| w.row(a).iter().sum::<f64>())
        .fold(0.0, f64::max);
    let grid = Grid::new(&w.candidates);

    let mut x = uniform.clone();
    let mut jump = uniform;
    let mut mixed = vec![0.0; m];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;

        for (v, (xa, ya)) in mixed.iter_mut().zip(x.iter().zip(&jump)) {
            *v = cfg.rw_mix * xa + (1.0 - cfg.rw_mix) * ya;
        }
        let mut next: Vec<f64> = (0..m)
            .map(|a| {
                w.row(a)
                    .iter()
                    .zip(&mixed)
                    .map(|(wab, xb)| wab * xb)
                    .sum::<f64>()
                    / max_degree
            })
            .collect();
        normalize_sum(&mut next);

        let peak = next.iter().copied().fold(0.0, f64::max);
        jump = if peak > 0.0 {
            next.iter()
                .map(|v| (cfg.reweight_strength * v / peak).exp())
                .collect()
        } else {
            vec![1.0; m]
        };
        grid.sinkhorn(&mut jump, cfg.sinkhorn_iters);
        normalize_sum(&mut jump);

        let delta: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    SoftScores {
        scores: x,
        iterations,
        converged,
        degenerate: false,
    }
}
