use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAX_RELEVANCE: u8 = 3;

/// Graded relevance (0 to 3) per `(query, image)` pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelevanceAnnotations {
    by_query: BTreeMap<String, BTreeMap<String, u8>>,
}

impl RelevanceAnnotations {
    pub fn insert(&mut self, query_id: &str, image_id: &str, relevance: u8) -> Result<()> {
        if relevance > MAX_RELEVANCE {
            return Err(Error::InvalidParameter(format!(
                "relevance {relevance} for ({query_id}, {image_id}) is outside 0..=3"
            )));
        }
        self.by_query
            .entry(query_id.to_string())
            .or_default()
            .insert(image_id.to_string(), relevance);
        Ok(())
    }

    pub fn get(&self, query_id: &str, image_id: &str) -> Option<u8> {
        self.by_query.get(query_id)?.get(image_id).copied()
    }

    pub fn for_query(&self, query_id: &str) -> Option<&BTreeMap<String, u8>> {
        self.by_query.get(query_id)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_query.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses `query_id<TAB>image_id<TAB>relevance` lines. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_tsv(text: &str, source: &Path) -> Result<Self> {
        let mut out = RelevanceAnnotations::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: source.to_path_buf(),
                line: n + 1,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(format!(
                    "expected 3 tab-separated columns, found {}",
                    cols.len()
                )));
            }
            let rel: u8 = cols[2].trim().parse().map_err(|_| {
                err(format!(
                    "relevance {:?} is not an integer in 0..=3",
                    cols[2]
                ))
            })?;
            out.insert(cols[0], cols[1], rel)
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text, path)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (q, images) in &self.by_query {
            for (img, rel) in images {
                out.push_str(&format!("{q}\t{img}\t{rel}\n"));
            }
        }
        out
    }
}
