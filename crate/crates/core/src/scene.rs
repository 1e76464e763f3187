//! Per-image detection records and the JSON manifest that carries them.
//!
//! A manifest stands in for the upstream detector and attribute classifiers:
//! every image contributes its detections (class label, box, local attribute
//! scores) and one vector of scene-level attribute scores. Ingestion clamps
//! boxes into the image frame and attribute scores into `[0, 1]`; anything
//! that cannot be repaired that way is rejected.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LOCAL_DIM: usize = 64;
pub const DEFAULT_GLOBAL_DIM: usize = 205;

/// Axis-aligned box in pixel coordinates, origin top-left.
///
/// Serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl From<[f64; 4]> for BoundingBox {
    fn from([x_min, y_min, x_max, y_max]: [f64; 4]) -> Self {
        BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn centroid(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.x_min < self.x_max && self.y_min < self.y_max)
    }

    fn is_finite(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
    }

    fn clamp_to(&self, width: f64, height: f64) -> Self {
        BoundingBox {
            x_min: self.x_min.clamp(0.0, width),
            y_min: self.y_min.clamp(0.0, height),
            x_max: self.x_max.clamp(0.0, width),
            y_max: self.y_max.clamp(0.0, height),
        }
    }

    /// The box reflected about the vertical centre line of an image of the given width.
    pub fn mirrored(&self, width: f64) -> Self {
        BoundingBox {
            x_min: width - self.x_max,
            y_min: self.y_min,
            x_max: width - self.x_min,
            y_max: self.y_max,
        }
    }
}

/// One detected object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "class")]
    pub class_label: String,
    pub bbox: BoundingBox,
    #[serde(rename = "attributes")]
    pub local_attributes: Vec<f64>,
}

/// Everything the ranker knows about one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    #[serde(rename = "id")]
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub global_attributes: Vec<f64>,
    pub detections: Vec<Detection>,
}

impl ImageRecord {
    /// Horizontal flip of every box (`x -> width - x`); attributes are untouched.
    pub fn mirrored(&self) -> Self {
        let w = f64::from(self.width);
        ImageRecord {
            detections: self
                .detections
                .iter()
                .map(|d| Detection {
                    bbox: d.bbox.mirrored(w),
                    ..d.clone()
                })
                .collect(),
            ..self.clone()
        }
    }
}

/// Attribute dimensionalities declared by a manifest header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub local: usize,
    pub global: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            local: DEFAULT_LOCAL_DIM,
            global: DEFAULT_GLOBAL_DIM,
        }
    }
}

/// A parsed manifest: header dimensionalities plus the image records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_local_dim")]
    pub local_dim: usize,
    #[serde(default = "default_global_dim")]
    pub global_dim: usize,
    #[serde(default)]
    pub images: Vec<ImageRecord>,
}

fn default_local_dim() -> usize {
    DEFAULT_LOCAL_DIM
}

fn default_global_dim() -> usize {
    DEFAULT_GLOBAL_DIM
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            local_dim: DEFAULT_LOCAL_DIM,
            global_dim: DEFAULT_GLOBAL_DIM,
            images: Vec::new(),
        }
    }
}

impl Manifest {
    pub fn dims(&self) -> Dims {
        Dims {
            local: self.local_dim,
            global: self.global_dim,
        }
    }

    /// Replace every attribute score by `1.0` if it is at least `threshold`, else `0.0`.
    pub fn binarize(&mut self, threshold: f64) {
        let cut = |v: &mut f64| *v = if *v >= threshold { 1.0 } else { 0.0 };
        for image in &mut self.images {
            image.global_attributes.iter_mut().for_each(cut);
            for det in &mut image.detections {
                det.local_attributes.iter_mut().for_each(cut);
            }
        }
    }
}

/// Reads and ingests a manifest file.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest_str(&text)
}

/// Ingests manifest JSON: checks dimensionalities and id uniqueness, then
/// clamps boxes into the image frame and attribute scores into `[0, 1]`.
pub fn parse_manifest_str(text: &str) -> Result<Manifest> {
    let mut manifest: Manifest = serde_json::from_str(text).map_err(Error::json)?;
    let dims = manifest.dims();
    let mut seen = HashSet::new();
    for record in &mut manifest.images {
        if !seen.insert(record.image_id.clone()) {
            return Err(Error::DuplicateImageId(record.image_id.clone()));
        }
        ingest_record(record, dims)?;
    }
    Ok(manifest)
}

/// Serializes a manifest in the canonical schema; the inverse of [`parse_manifest_str`]
/// on already-ingested records.
pub fn serialize_manifest(manifest: &Manifest) -> String {
    serde_json::to_string_pretty(manifest).expect("manifest serialization is infallible")
}

fn ingest_record(record: &mut ImageRecord, dims: Dims) -> Result<()> {
    let invalid = |message: String| Error::InvalidRecord {
        image_id: record.image_id.clone(),
        message,
    };
    if record.width == 0 || record.height == 0 {
        return Err(invalid(format!(
            "image size {}x{} must be positive",
            record.width, record.height
        )));
    }
    if record.global_attributes.len() != dims.global {
        return Err(Error::Dimensionality {
            image_id: record.image_id.clone(),
            what: "global_attributes".into(),
            expected: dims.global,
            found: record.global_attributes.len(),
        });
    }
    for (k, det) in record.detections.iter().enumerate() {
        if det.local_attributes.len() != dims.local {
            return Err(Error::Dimensionality {
                image_id: record.image_id.clone(),
                what: format!("detection {k} attributes"),
                expected: dims.local,
                found: det.local_attributes.len(),
            });
        }
        if !det.bbox.is_finite() {
            return Err(invalid(format!("detection {k} has a non-finite box")));
        }
        let attrs_finite = det.local_attributes.iter().all(|v| v.is_finite());
        if !attrs_finite {
            return Err(invalid(format!(
                "detection {k} has non-finite attribute scores"
            )));
        }
    }
    if !record.global_attributes.iter().all(|v| v.is_finite()) {
        return Err(invalid("non-finite global attribute score".into()));
    }

    let (w, h) = (f64::from(record.width), f64::from(record.height));
    for (k, det) in record.detections.iter_mut().enumerate() {
        det.bbox = det.bbox.clamp_to(w, h);
        if det.bbox.is_degenerate() {
            return Err(Error::InvalidRecord {
                image_id: record.image_id.clone(),
                message: format!("detection {k} box is degenerate after clamping"),
            });
        }
        clamp_unit(&mut det.local_attributes);
    }
    clamp_unit(&mut record.global_attributes);
    Ok(())
}

fn clamp_unit(values: &mut [f64]) {
    for v in values {
        *v = v.clamp(0.0, 1.0);
    }
}

/// One violated record invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyImageSize,
    DegenerateBox {
        detection: usize,
    },
    BoxOutsideImage {
        detection: usize,
    },
    NonFinite {
        field: String,
    },
    OutOfUnitRange {
        field: String,
    },
    Dimensionality {
        field: String,
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyImageSize => write!(f, "image width and height must be positive"),
            Violation::DegenerateBox { detection } => {
                write!(f, "detection {detection}: degenerate box")
            }
            Violation::BoxOutsideImage { detection } => {
                write!(f, "detection {detection}: box extends outside the image")
            }
            Violation::NonFinite { field } => write!(f, "{field}: non-finite value"),
            Violation::OutOfUnitRange { field } => write!(f, "{field}: value outside [0, 1]"),
            Violation::Dimensionality {
                field,
                expected,
                found,
            } => write!(f, "{field}: expected {expected} entries, found {found}"),
        }
    }
}

/// Every invariant a record violates; empty iff the record is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_record(record: &ImageRecord, dims: Dims) -> ValidationReport {
    let mut violations = Vec::new();
    if record.width == 0 || record.height == 0 {
        violations.push(Violation::EmptyImageSize);
    }
    let (w, h) = (f64::from(record.width), f64::from(record.height));
    check_vector(
        &mut violations,
        "global_attributes",
        &record.global_attributes,
        dims.global,
    );
    for (k, det) in record.detections.iter().enumerate() {
        let b = &det.bbox;
        if !b.is_finite() {
            violations.push(Violation::NonFinite {
                field: format!("detection {k} bbox"),
            });
        } else {
            if b.is_degenerate() {
                violations.push(Violation::DegenerateBox { detection: k });
            }
            if b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > w || b.y_max > h {
                violations.push(Violation::BoxOutsideImage { detection: k });
            }
        }
        check_vector(
            &mut violations,
            &format!("detection {k} attributes"),
            &det.local_attributes,
            dims.local,
        );
    }
    ValidationReport { violations }
}

fn check_vector(out: &mut Vec<Violation>, field: &str, values: &[f64], expected: usize) {
    if values.len() != expected {
        out.push(Violation::Dimensionality {
            field: field.to_string(),
            expected,
            found: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite {
            field: field.to_string(),
        });
    }
    if values
        .iter()
        .any(|v| v.is_finite() && !(0.0..=1.0).contains(v))
    {
        out.push(Violation::OutOfUnitRange {
            field: field.to_string(),
        });
    }
}
