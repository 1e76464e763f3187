use serde::Serialize;

use super::RelevanceAnnotations;
use crate::rank::RankList;

fn gain(rel: u8) -> f64 {
    f64::from((1u32 << rel) - 1)
}

/// Discounted cumulative gain of the first `k` relevances, using the
/// `log2(i + 1)` discount at 1-based rank `i`. `k` past the end of the list
/// is truncated to its length.
pub fn dcg_at_k(relevances: &[u8], k: usize) -> f64 {
    relevances
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &rel)| gain(rel) / ((i + 2) as f64).log2())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NdcgValue {
    pub value: f64,
    /// Ranked images (within the cutoff) with no judgment for the query.
    pub unannotated: usize,
}

/// nDCG of a ranklist at cutoff `k`.
///
/// The ideal ordering is every judged image of the query sorted by
/// relevance. Unjudged images in the ranklist count as relevance 0. A query
/// whose judged set has zero ideal gain scores 1.
pub fn ndcg_at_k(ranklist: &RankList, annotations: &RelevanceAnnotations, k: usize) -> NdcgValue {
    let judged = annotations.for_query(&ranklist.query_id);
    let mut unannotated = 0;
    let produced: Vec<u8> = ranklist
        .entries
        .iter()
        .take(k)
        .map(|e| match judged.and_then(|j| j.get(&e.image_id)) {
            Some(&r) => r,
            None => {
                unannotated += 1;
                0
            }
        })
        .collect();
    let mut ideal: Vec<u8> = judged
        .map(|j| j.values().copied().collect())
        .unwrap_or_default();
    ideal.sort_unstable_by(|a, b| b.cmp(a));

    let idcg = dcg_at_k(&ideal, k);
    let value = if idcg == 0.0 {
        1.0
    } else {
        (dcg_at_k(&produced, k) / idcg).clamp(0.0, 1.0)
    };
    NdcgValue { value, unannotated }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NdcgCurve {
    pub query_id: String,
    pub points: Vec<(usize, f64)>,
    pub unannotated: usize,
}

pub fn ndcg_curve(
    ranklist: &RankList,
    annotations: &RelevanceAnnotations,
    ks: &[usize],
) -> NdcgCurve {
    let mut unannotated = 0;
    let points = ks
        .iter()
        .map(|&k| {
            let v = ndcg_at_k(ranklist, annotations, k);
            unannotated = unannotated.max(v.unannotated);
            (k, v.value)
        })
        .collect();
    NdcgCurve {
        query_id: ranklist.query_id.clone(),
        points,
        unannotated,
    }
}
