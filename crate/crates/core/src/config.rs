//! Flat key-value run configuration.
//!
//! The same `key=value` vocabulary is used by the TOML config file, by
//! command-line overrides, and by the header line embedded in every output,
//! so an output's header can be fed back in to reproduce it.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matcher::{Fusion, MatcherConfig, NodeAffinity};
use crate::rank::{Ablation, RankParams};

pub const CONFIG_ENV: &str = "AGRANK_CONFIG";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub matcher: MatcherConfig,
    /// Bandwidth used when `node_affinity = rbf`; kept even when cosine is selected.
    pub rbf_sigma: f64,
    pub ablation: BTreeSet<Ablation>,
    pub binarize_threshold: Option<f64>,
    pub manifest: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fusion = Fusion::default();
        RunConfig {
            alpha: fusion.alpha,
            beta: fusion.beta,
            matcher: MatcherConfig::default(),
            rbf_sigma: 1.0,
            ablation: BTreeSet::new(),
            binarize_threshold: None,
            manifest: None,
            cache: None,
            qrels: None,
            out_dir: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "alpha",
    "beta",
    "node_affinity",
    "rbf_sigma",
    "sigma_mu",
    "sigma_theta",
    "sigma_o",
    "sigma_area",
    "rw_mix",
    "reweight_strength",
    "sinkhorn_iters",
    "max_iters",
    "tol",
    "ablation",
    "binarize_threshold",
    "manifest",
    "cache",
    "qrels",
    "out_dir",
];

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "none".into(), |p| p.display().to_string())
}

fn parse_opt_path(v: &str) -> Option<PathBuf> {
    (v != "none" && !v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: String| Error::InvalidParameter(format!("{key}={value}: {e}"));
        let f = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
        let u = |v: &str| v.parse::<usize>().map_err(|e| bad(e.to_string()));
        let m = &mut self.matcher;
        match key {
            "alpha" => self.alpha = f(value)?,
            "beta" => self.beta = f(value)?,
            "node_affinity" => {
                m.node_affinity = match value {
                    "cosine" => NodeAffinity::Cosine,
                    "rbf" => NodeAffinity::Rbf {
                        sigma: self.rbf_sigma,
                    },
                    _ => return Err(bad("expected cosine or rbf".into())),
                }
            }
            "rbf_sigma" => {
                self.rbf_sigma = f(value)?;
                if let NodeAffinity::Rbf { sigma } = &mut m.node_affinity {
                    *sigma = self.rbf_sigma;
                }
            }
            "sigma_mu" => m.sigma_mu = f(value)?,
            "sigma_theta" => m.sigma_theta = f(value)?,
            "sigma_o" => m.sigma_o = f(value)?,
            "sigma_area" => m.sigma_area = f(value)?,
            "rw_mix" => m.rw_mix = f(value)?,
            "reweight_strength" => m.reweight_strength = f(value)?,
            "sinkhorn_iters" => m.sinkhorn_iters = u(value)?,
            "max_iters" => m.max_iters = u(value)?,
            "tol" => m.tol = f(value)?,
            "ablation" => {
                self.ablation = if value == "none" || value.is_empty() {
                    BTreeSet::new()
                } else {
                    value
                        .split(',')
                        .map(|s| s.trim().parse::<Ablation>())
                        .collect::<Result<_>>()?
                }
            }
            "binarize_threshold" => {
                self.binarize_threshold = match value {
                    "none" | "" => None,
                    v => Some(f(v)?),
                }
            }
            "manifest" => self.manifest = parse_opt_path(value),
            "cache" => self.cache = parse_opt_path(value),
            "qrels" => self.qrels = parse_opt_path(value),
            "out_dir" => self.out_dir = parse_opt_path(value),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown configuration key {key:?}"
                )))
            }
        }
        Ok(())
    }

    /// Every key with its current value, in [`KEYS`] order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let m = &self.matcher;
        let affinity = match m.node_affinity {
            NodeAffinity::Cosine => "cosine",
            NodeAffinity::Rbf { .. } => "rbf",
        };
        let ablation = if self.ablation.is_empty() {
            "none".to_string()
        } else {
            self.ablation
                .iter()
                .map(Ablation::as_str)
                .collect::<Vec<_>>()
                .join(",")
        };
        let values = [
            self.alpha.to_string(),
            self.beta.to_string(),
            affinity.to_string(),
            self.rbf_sigma.to_string(),
            m.sigma_mu.to_string(),
            m.sigma_theta.to_string(),
            m.sigma_o.to_string(),
            m.sigma_area.to_string(),
            m.rw_mix.to_string(),
            m.reweight_strength.to_string(),
            m.sinkhorn_iters.to_string(),
            m.max_iters.to_string(),
            m.tol.to_string(),
            ablation,
            self.binarize_threshold
                .map_or_else(|| "none".into(), |t| t.to_string()),
            opt_path(&self.manifest),
            opt_path(&self.cache),
            opt_path(&self.qrels),
            opt_path(&self.out_dir),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    /// Space-separated `key=value` pairs; values containing whitespace are
    /// written as JSON strings.
    pub fn header(&self) -> String {
        self.pairs()
            .into_iter()
            .map(|(k, v)| {
                if v.contains(char::is_whitespace) || v.starts_with('"') {
                    format!("{k}={}", serde_json::to_string(&v).unwrap())
                } else {
                    format!("{k}={v}")
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Applies the `key=value` pairs of a header line; unknown keys (such as
    /// `query`) are returned rather than rejected.
    pub fn apply_header(&mut self, header: &str) -> Result<Vec<(String, String)>> {
        let mut unknown = Vec::new();
        for (k, v) in split_header(header)? {
            if KEYS.contains(&k.as_str()) {
                self.set(&k, &v)?;
            } else {
                unknown.push((k, v));
            }
        }
        Ok(unknown)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidParameter(format!("config file: {e}")))?;
        let mut cfg = RunConfig::default();
        // rbf_sigma first so node_affinity = "rbf" picks it up regardless of key order
        if let Some(v) = table.get("rbf_sigma") {
            cfg.set("rbf_sigma", &toml_scalar(v))?;
        }
        for (k, v) in &table {
            cfg.set(k, &toml_scalar(v))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        self.pairs()
            .into_iter()
            .map(|(k, v)| match k {
                "node_affinity" | "ablation" | "manifest" | "cache" | "qrels" | "out_dir" => {
                    format!("{k} = {}\n", toml::Value::String(v))
                }
                "binarize_threshold" if v == "none" => format!("{k} = \"none\"\n"),
                _ => format!("{k} = {v}\n"),
            })
            .collect()
    }

    pub fn rank_params(&self) -> RankParams {
        RankParams {
            fusion: Fusion {
                alpha: self.alpha,
                beta: self.beta,
            },
            matcher: self.matcher,
            ablation: self.ablation.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rank_params().validate()
    }
}

fn toml_scalar(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Array(items) => items.iter().map(toml_scalar).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

fn split_header(header: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut rest = header.trim_start();
    while !rest.is_empty() {
        let eq = rest
            .find('=')
            .ok_or_else(|| Error::InvalidParameter(format!("malformed header near {rest:?}")))?;
        let key = rest[..eq].to_string();
        rest = &rest[eq + 1..];
        let value = if rest.starts_with('"') {
            let mut de = serde_json::Deserializer::from_str(rest).into_iter::<String>();
            let v = de
                .next()
                .ok_or_else(|| Error::InvalidParameter("unterminated quoted value".into()))?
                .map_err(Error::json)?;
            rest = &rest[de.byte_offset()..];
            v
        } else {
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            let v = rest[..end].to_string();
            rest = &rest[end..];
            v
        };
        out.push((key, value));
        rest = rest.trim_start();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_echo_fusion_constants() {
        let h = RunConfig::default().header();
        assert!(h.starts_with("alpha=0.4 beta=0.4 node_affinity=cosine"));
        assert!(h.contains("ablation=none"));
    }

    #[test]
    fn header_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("ablation", "drop_edges,drop_weights").unwrap();
        cfg.set("sigma_theta", "12.5").unwrap();
        cfg.set("tol", "1e-9").unwrap();
        cfg.set("rbf_sigma", "0.3").unwrap();
        cfg.set("node_affinity", "rbf").unwrap();
        cfg.set("cache", "/tmp/with space/c.json").unwrap();
        let header = format!("query=q1 {}", cfg.header());
        let mut back = RunConfig::default();
        let unknown = back.apply_header(&header).unwrap();
        assert_eq!(unknown, vec![("query".to_string(), "q1".to_string())]);
        assert_eq!(back, cfg);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("alpha", "0.5").unwrap();
        cfg.set("ablation", "drop_global_node").unwrap();
        cfg.set("binarize_threshold", "0.5").unwrap();
        cfg.set("qrels", "q.tsv").unwrap();
        let back = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn toml_accepts_native_types() {
        let cfg = RunConfig::from_toml_str(
            "alpha = 0.3\nmax_iters = 50\nablation = [\"drop_edges\"]\nnode_affinity = \"rbf\"\nrbf_sigma = 2.0\n",
        )
        .unwrap();
        assert_eq!(cfg.alpha, 0.3);
        assert_eq!(cfg.matcher.max_iters, 50);
        assert!(cfg.ablation.contains(&Ablation::DropEdges));
        assert_eq!(cfg.matcher.node_affinity, NodeAffinity::Rbf { sigma: 2.0 });
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("gamma", "1").is_err());
        assert!(cfg.set("alpha", "lots").is_err());
        assert!(cfg.set("ablation", "drop_everything").is_err());
        cfg.set("alpha", "0.9").unwrap();
        assert!(cfg.validate().is_err());
    }
}
