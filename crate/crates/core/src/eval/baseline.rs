use std::collections::BTreeMap;

use crate::rank::{RankEntry, RankList};
use crate::scene::ImageRecord;

/// Size of the multiset intersection of two label lists, divided by the query's label count.
pub fn common_object_score<'a, Q, D>(query: Q, db: D) -> f64
where
    Q: IntoIterator<Item = &'a str>,
    D: IntoIterator<Item = &'a str>,
{
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut n = 0usize;
    for c in query {
        counts.entry(c).or_default().0 += 1;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    for c in db {
        if let Some(e) = counts.get_mut(c) {
            e.1 += 1;
        }
    }
    let shared: usize = counts.values().map(|&(a, b)| a.min(b)).sum();
    shared as f64 / n as f64
}

/// Ranks the database by the number of object classes shared with the query.
/// The score goes in `fused` and `s_lcl`; the other components are 0.
pub fn baseline_common_objects(query: &ImageRecord, database: &[ImageRecord]) -> RankList {
    let labels = |r: &ImageRecord| -> Vec<String> {
        r.detections.iter().map(|d| d.class_label.clone()).collect()
    };
    let q = labels(query);
    let entries = database
        .iter()
        .map(|d| {
            let dl = labels(d);
            let s =
                common_object_score(q.iter().map(String::as_str), dl.iter().map(String::as_str));
            entry(&d.image_id, s)
        })
        .collect();
    RankList::new(query.image_id.clone(), entries)
}

pub(crate) fn entry(image_id: &str, score: f64) -> RankEntry {
    RankEntry {
        image_id: image_id.to_string(),
        fused: score,
        s_lcl: score,
        s_gbl: 0.0,
        s_edge: 0.0,
    }
}
