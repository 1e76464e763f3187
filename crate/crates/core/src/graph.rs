//! Attribute-Graph construction.
//!
//! An image with `N` detections becomes a fully connected graph of `N` local
//! nodes plus one global node. Local nodes carry the detection's attribute
//! scores, the global node carries the scene attributes. Local edges hold
//! `[mu, theta, overlap]` for each unordered pair of detections; global edges
//! hold `[mu, theta, area]` from each detection to the centroid of the layout.
//!
//! Distances are divided by the image diagonal so graphs from images of
//! different resolutions are comparable. Angles are folded into `[0, 90]`
//! degrees so that a horizontally mirrored image yields the same features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{BoundingBox, ImageRecord};

/// Distance normalization recorded in every graph cache header.
pub const NORMALIZATION: &str = "image-diagonal";

/// Intersection area over the smaller box's area.
///
/// Equals 1 when one box lies inside the other and 0 for disjoint boxes.
pub fn overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let ih = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let smaller = a.area().min(b.area());
    if smaller <= 0.0 {
        return 0.0;
    }
    (iw * ih / smaller).min(1.0)
}

/// Arithmetic mean of a set of centroids.
pub fn global_centroid(centroids: &[(f64, f64)]) -> Result<(f64, f64)> {
    if centroids.is_empty() {
        return Err(Error::UndefinedCentroid);
    }
    let n = centroids.len() as f64;
    let (sx, sy) = sum_points(centroids);
    Ok((sx / n, sy / n))
}

fn sum_points(points: &[(f64, f64)]) -> (f64, f64) {
    points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y))
}

/// Angle in degrees between an undirected segment and the horizontal,
/// with `theta` and `180 - theta` identified. A zero vector maps to 0.
pub fn canonical_angle(dx: f64, dy: f64) -> f64 {
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    if dx == 0.0 {
        return 90.0;
    }
    dy.abs().atan2(dx.abs()).to_degrees().clamp(0.0, 90.0)
}

/// Relative importance of each detection: its box area over the total box area.
pub fn node_weights(record: &ImageRecord) -> Vec<f64> {
    let areas: Vec<f64> = record.detections.iter().map(|d| d.bbox.area()).collect();
    let total: f64 = areas.iter().sum();
    if total <= 0.0 {
        return Vec::new();
    }
    areas.into_iter().map(|a| a / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Local,
    Global,
}

/// `[mu, theta, third]`: normalized distance, folded angle in degrees, and
/// the overlap (local edges) or the local endpoint's area fraction (global edges).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeFeature {
    pub kind: EdgeKind,
    pub mu: f64,
    pub theta: f64,
    pub third: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalNode {
    pub index: usize,
    pub class_label: String,
    pub attributes: Vec<f64>,
    /// Box centre in units of the image diagonal.
    pub centroid: (f64, f64),
    pub area_fraction: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalNode {
    pub attributes: Vec<f64>,
    /// Mean of the local centroids; absent when the image has no detections.
    pub centroid: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEdge {
    pub i: usize,
    pub j: usize,
    pub feature: EdgeFeature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeGraph {
    pub image_id: String,
    pub local_nodes: Vec<LocalNode>,
    pub global_node: GlobalNode,
    /// One edge per unordered pair `i < j`, in lexicographic order.
    pub local_edges: Vec<LocalEdge>,
    /// `global_edges[i]` joins local node `i` to the global node.
    pub global_edges: Vec<EdgeFeature>,
}

impl AttributeGraph {
    pub fn num_local(&self) -> usize {
        self.local_nodes.len()
    }

    pub fn node_count(&self) -> usize {
        self.local_nodes.len() + 1
    }

    pub fn edge_count(&self) -> usize {
        self.local_edges.len() + self.global_edges.len()
    }

    /// The local edge joining `a` and `b`, in either order.
    pub fn local_edge(&self, a: usize, b: usize) -> Option<&EdgeFeature> {
        let n = self.num_local();
        if a == b || a >= n || b >= n {
            return None;
        }
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        let idx = i * n - i * (i + 1) / 2 + (j - i - 1);
        self.local_edges.get(idx).map(|e| &e.feature)
    }

    pub fn global_edge(&self, i: usize) -> Option<&EdgeFeature> {
        self.global_edges.get(i)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.local_nodes.iter().map(|n| n.weight).collect()
    }

    pub fn class_labels(&self) -> impl Iterator<Item = &str> {
        self.local_nodes.iter().map(|n| n.class_label.as_str())
    }
}

/// Pixel-space geometry shared by all edges of one record.
struct Layout {
    centroids: Vec<(f64, f64)>,
    sum: (f64, f64),
    diagonal: f64,
    image_area: f64,
}

impl Layout {
    fn new(record: &ImageRecord) -> Self {
        let (w, h) = (f64::from(record.width), f64::from(record.height));
        let centroids: Vec<_> = record
            .detections
            .iter()
            .map(|d| d.bbox.centroid())
            .collect();
        let sum = sum_points(&centroids);
        Layout {
            centroids,
            sum,
            diagonal: w.hypot(h),
            image_area: w * h,
        }
    }

    fn feature(&self, kind: EdgeKind, dx: f64, dy: f64, third: f64) -> EdgeFeature {
        EdgeFeature {
            kind,
            mu: dx.hypot(dy) / self.diagonal,
            theta: canonical_angle(dx, dy),
            third,
        }
    }

    fn local(&self, record: &ImageRecord, i: usize, j: usize) -> EdgeFeature {
        let (xi, yi) = self.centroids[i];
        let (xj, yj) = self.centroids[j];
        let o = overlap(&record.detections[i].bbox, &record.detections[j].bbox);
        self.feature(EdgeKind::Local, xj - xi, yj - yi, o)
    }

    fn global(&self, record: &ImageRecord, i: usize) -> EdgeFeature {
        // (N c_i - sum c_k) / N is c_i - c_g without rounding c_g first, which
        // keeps the offset exactly sign-symmetric under a horizontal flip.
        let n = self.centroids.len() as f64;
        let (xi, yi) = self.centroids[i];
        let dx = (n * xi - self.sum.0) / n;
        let dy = (n * yi - self.sum.1) / n;
        let area = record.detections[i].bbox.area() / self.image_area;
        self.feature(EdgeKind::Global, dx, dy, area)
    }
}

/// Features of the local edge between detections `i` and `j` of `record`.
pub fn local_edge_feature(record: &ImageRecord, i: usize, j: usize) -> EdgeFeature {
    Layout::new(record).local(record, i, j)
}

/// Features of the edge between detection `i` and the global node.
pub fn global_edge_feature(record: &ImageRecord, i: usize) -> EdgeFeature {
    Layout::new(record).global(record, i)
}

/// Builds the Attribute-Graph of one image record.
pub fn build_graph(record: &ImageRecord) -> AttributeGraph {
    let layout = Layout::new(record);
    let weights = node_weights(record);
    let n = record.detections.len();

    let local_nodes = record
        .detections
        .iter()
        .enumerate()
        .map(|(index, det)| {
            let (cx, cy) = layout.centroids[index];
            LocalNode {
                index,
                class_label: det.class_label.clone(),
                attributes: det.local_attributes.clone(),
                centroid: (cx / layout.diagonal, cy / layout.diagonal),
                area_fraction: det.bbox.area() / layout.image_area,
                weight: weights[index],
            }
        })
        .collect();

    let mut local_edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            local_edges.push(LocalEdge {
                i,
                j,
                feature: layout.local(record, i, j),
            });
        }
    }

    let global_edges = (0..n).map(|i| layout.global(record, i)).collect();
    let centroid = global_centroid(&layout.centroids)
        .ok()
        .map(|(x, y)| (x / layout.diagonal, y / layout.diagonal));

    AttributeGraph {
        image_id: record.image_id.clone(),
        local_nodes,
        global_node: GlobalNode {
            attributes: record.global_attributes.clone(),
            centroid,
        },
        local_edges,
        global_edges,
    }
}
