//! Attribute-Graph image ranking.
//!
//! Images arrive as detection manifests ([`scene`]), become Attribute-Graphs
//! ([`graph`]), are compared by constrained graph matching ([`matcher`]),
//! ranked against a database ([`rank`]) and evaluated with nDCG ([`eval`]).
//! [`synth`] produces seeded datasets with known ground truth.

pub mod cache;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod matcher;
pub mod rank;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
