//! JSON container of prebuilt graphs keyed by image id.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeGraph, NORMALIZATION};
use crate::scene::Dims;

pub const CACHE_FORMAT: &str = "agrank-graph-cache";
pub const BUILDER_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format: String,
    pub builder_version: String,
    pub normalization: String,
    pub local_dim: usize,
    pub global_dim: usize,
    pub binarize_threshold: Option<f64>,
}

impl CacheHeader {
    pub fn new(dims: Dims, binarize_threshold: Option<f64>) -> Self {
        CacheHeader {
            format: CACHE_FORMAT.into(),
            builder_version: BUILDER_VERSION.into(),
            normalization: NORMALIZATION.into(),
            local_dim: dims.local,
            global_dim: dims.global,
            binarize_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphCache {
    pub header: CacheHeader,
    pub graphs: BTreeMap<String, AttributeGraph>,
}

impl GraphCache {
    pub fn new(header: CacheHeader) -> Self {
        GraphCache {
            header,
            graphs: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, graph: AttributeGraph) {
        self.graphs.insert(graph.image_id.clone(), graph);
    }

    pub fn get(&self, image_id: &str) -> Result<&AttributeGraph> {
        self.graphs
            .get(image_id)
            .ok_or_else(|| Error::UnknownImage(image_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("graph cache serialization is infallible");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cache: GraphCache = serde_json::from_str(text).map_err(Error::json)?;
        if cache.header.format != CACHE_FORMAT {
            return Err(Error::InvalidParameter(format!(
                "not a graph cache (format {:?})",
                cache.header.format
            )));
        }
        if cache.header.normalization != NORMALIZATION {
            return Err(Error::InvalidParameter(format!(
                "cache uses distance normalization {:?}, expected {NORMALIZATION:?}",
                cache.header.normalization
            )));
        }
        Ok(cache)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
