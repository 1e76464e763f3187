//! Ranking evaluation: nDCG, the common-objects baseline and the CSV report.

mod baseline;
mod ndcg;
mod qrels;

use std::cmp::Ordering;

pub use baseline::{baseline_common_objects, common_object_score};
pub use ndcg::{dcg_at_k, ndcg_at_k, ndcg_curve, NdcgCurve, NdcgValue};
pub use qrels::{RelevanceAnnotations, MAX_RELEVANCE};

use crate::graph::AttributeGraph;
use crate::rank::RankList;

/// Common-objects baseline over prebuilt graphs (class labels only).
pub fn baseline_from_graphs<'a, I>(query: &AttributeGraph, database: I) -> RankList
where
    I: IntoIterator<Item = &'a AttributeGraph>,
{
    let entries = database
        .into_iter()
        .map(|d| {
            baseline::entry(
                &d.image_id,
                common_object_score(query.class_labels(), d.class_labels()),
            )
        })
        .collect();
    RankList::new(query.image_id.clone(), entries)
}

/// CSV with one row per `(query, k)` and a `mean` row per `k`.
/// `header`, when non-empty, is written as a leading `#` comment line.
pub fn report_csv(curves: &[NdcgCurve], ks: &[usize], header: &str) -> String {
    let mut out = String::new();
    if !header.is_empty() {
        out.push_str(&format!("# {header}\n"));
    }
    out.push_str("query_id,k,ndcg\n");
    for c in curves {
        for &(k, v) in &c.points {
            out.push_str(&format!("{},{k},{v}\n", c.query_id));
        }
    }
    for (i, &k) in ks.iter().enumerate() {
        out.push_str(&format!("mean,{k},{}\n", mean_at(curves, i)));
    }
    out
}

/// Mean of the `i`-th point over all curves (0 when there are none).
pub fn mean_at(curves: &[NdcgCurve], i: usize) -> f64 {
    if curves.is_empty() {
        return 0.0;
    }
    curves.iter().map(|c| c.points[i].1).sum::<f64>() / curves.len() as f64
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant or the inputs are shorter than two.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    if a.len() < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}
