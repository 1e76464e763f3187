//! Seeded synthetic scenes with graded ground truth.
//!
//! Every base scene is emitted once unchanged and once per rung of a
//! perturbation ladder. The base image doubles as the query; its judged
//! reference set is the base (relevance 3) and its perturbed copies, whose
//! relevance falls to 0 at the last rung.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{RelevanceAnnotations, MAX_RELEVANCE};
use crate::graph::node_weights;
use crate::scene::{BoundingBox, Detection, ImageRecord, Manifest};

/// One rung of the perturbation ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Standard deviation of Gaussian noise added to every attribute score.
    pub attr_noise: f64,
    /// Standard deviation of box displacement, in units of the image diagonal.
    pub jitter: f64,
    /// Mean probability of removing an object; smaller objects are removed more often.
    pub drop_prob: f64,
}

impl Perturbation {
    pub const NONE: Perturbation = Perturbation {
        attr_noise: 0.0,
        jitter: 0.0,
        drop_prob: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.attr_noise) && ok(self.jitter) && ok(self.drop_prob) && self.drop_prob <= 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "perturbation magnitudes must be non-negative (drop_prob <= 1): {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    /// Number of base scenes (one query each).
    pub num_images: usize,
    pub num_classes: usize,
    pub max_objects: usize,
    pub ladder: Vec<Perturbation>,
    pub local_dim: usize,
    pub global_dim: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 7,
            num_images: 50,
            num_classes: 8,
            max_objects: 5,
            ladder: vec![
                Perturbation {
                    attr_noise: 0.05,
                    jitter: 0.02,
                    drop_prob: 0.1,
                },
                Perturbation {
                    attr_noise: 0.12,
                    jitter: 0.05,
                    drop_prob: 0.25,
                },
                Perturbation {
                    attr_noise: 0.25,
                    jitter: 0.1,
                    drop_prob: 0.4,
                },
            ],
            local_dim: crate::scene::DEFAULT_LOCAL_DIM,
            global_dim: crate::scene::DEFAULT_GLOBAL_DIM,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_images > 0 && (self.num_classes == 0 || self.max_objects == 0) {
            return Err(Error::InvalidParameter(
                "num_classes and max_objects must be positive".into(),
            ));
        }
        if self.local_dim == 0 || self.global_dim == 0 {
            return Err(Error::InvalidParameter(
                "attribute dimensionalities must be positive".into(),
            ));
        }
        self.ladder.iter().try_for_each(Perturbation::validate)
    }
}

/// A query's judged references with their ladder position (0 = base).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthQuery {
    pub query_id: String,
    pub references: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub manifest: Manifest,
    pub annotations: RelevanceAnnotations,
    pub queries: Vec<SynthQuery>,
}

/// Relevance of the copy at 1-based `rung` of an `len`-rung ladder:
/// falls from just below 3 to 0 at the last rung.
pub fn rung_relevance(rung: usize, len: usize) -> u8 {
    if rung == 0 || len == 0 {
        return MAX_RELEVANCE;
    }
    let r = usize::from(MAX_RELEVANCE);
    let steps = (r * rung).div_ceil(len);
    (r - steps.min(r)) as u8
}

fn unit_noise(rng: &mut ChaCha8Rng, values: &mut [f64], sigma: f64) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    for v in values {
        *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
    }
}

fn prototype(rng: &mut ChaCha8Rng, dim: usize, strong: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim)
        .map(|_| rng.random::<f64>().powi(3) * 0.3)
        .collect();
    for _ in 0..strong.min(dim) {
        let k = rng.random_range(0..dim);
        v[k] = rng.random_range(0.6..1.0);
    }
    v
}

fn base_scene(
    rng: &mut ChaCha8Rng,
    id: String,
    params: &SynthParams,
    class_protos: &[Vec<f64>],
    scene_protos: &[Vec<f64>],
) -> ImageRecord {
    let width: u32 = rng.random_range(320..=640);
    let height: u32 = rng.random_range(240..=480);
    let (w, h) = (f64::from(width), f64::from(height));

    let mut global = scene_protos[rng.random_range(0..scene_protos.len())].clone();
    unit_noise(rng, &mut global, 0.05);

    let n = rng.random_range(1..=params.max_objects);
    let detections = (0..n)
        .map(|_| {
            let class = rng.random_range(0..params.num_classes);
            let bw = (w * rng.random_range(0.1..0.5)).round();
            let bh = (h * rng.random_range(0.1..0.5)).round();
            let x0 = rng.random_range(0.0..=(w - bw)).round();
            let y0 = rng.random_range(0.0..=(h - bh)).round();
            let mut attrs = class_protos[class].clone();
            unit_noise(rng, &mut attrs, 0.1);
            Detection {
                class_label: format!("class{class:02}"),
                bbox: BoundingBox::new(x0, y0, x0 + bw, y0 + bh),
                local_attributes: attrs,
            }
        })
        .collect();

    ImageRecord {
        image_id: id,
        width,
        height,
        global_attributes: global,
        detections,
    }
}

/// Per-object drop probability: `drop_prob * (1 - w_i) * N / (N - 1)` for
/// area share `w_i`, so small objects go missing more often while the mean
/// rate stays `drop_prob`. A lone object is never dropped.
fn drop_probabilities(base: &ImageRecord, drop_prob: f64) -> Vec<f64> {
    let n = base.detections.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let scale = n as f64 / (n - 1) as f64;
    node_weights(base)
        .into_iter()
        .map(|w| (drop_prob * (1.0 - w) * scale).clamp(0.0, 1.0))
        .collect()
}

fn perturb(rng: &mut ChaCha8Rng, base: &ImageRecord, id: String, p: Perturbation) -> ImageRecord {
    let (w, h) = (f64::from(base.width), f64::from(base.height));
    let diag = w.hypot(h);
    let shift = Normal::new(0.0, p.jitter * diag).expect("jitter is finite");

    let drop_p = drop_probabilities(base, p.drop_prob);
    let mut detections = Vec::with_capacity(base.detections.len());
    for (det, &p_drop) in base.detections.iter().zip(&drop_p) {
        if rng.random_bool(p_drop) {
            continue;
        }
        let b = det.bbox;
        let dx = shift.sample(rng).round();
        let dy = shift.sample(rng).round();
        let x0 = (b.x_min + dx).clamp(0.0, w - b.width());
        let y0 = (b.y_min + dy).clamp(0.0, h - b.height());
        let mut attrs = det.local_attributes.clone();
        unit_noise(rng, &mut attrs, p.attr_noise);
        detections.push(Detection {
            class_label: det.class_label.clone(),
            bbox: BoundingBox::new(x0, y0, x0 + b.width(), y0 + b.height()),
            local_attributes: attrs,
        });
    }
    if detections.is_empty() {
        detections.push(base.detections[0].clone());
    }

    let mut global = base.global_attributes.clone();
    unit_noise(rng, &mut global, p.attr_noise);
    ImageRecord {
        image_id: id,
        width: base.width,
        height: base.height,
        global_attributes: global,
        detections,
    }
}

/// Generates a manifest and its relevance judgments; fully determined by `params`.
pub fn synth_generate(params: &SynthParams) -> Result<SynthDataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut manifest = Manifest {
        local_dim: params.local_dim,
        global_dim: params.global_dim,
        images: Vec::new(),
    };
    let mut annotations = RelevanceAnnotations::default();
    let mut queries = Vec::new();
    if params.num_images == 0 {
        return Ok(SynthDataset {
            manifest,
            annotations,
            queries,
        });
    }

    let class_protos: Vec<_> = (0..params.num_classes)
        .map(|_| prototype(&mut rng, params.local_dim, 6))
        .collect();
    let scene_types = (params.num_classes / 2).max(3);
    let scene_protos: Vec<_> = (0..scene_types)
        .map(|_| prototype(&mut rng, params.global_dim, 5))
        .collect();

    for s in 0..params.num_images {
        let base_id = format!("s{s:03}_base");
        let base = base_scene(
            &mut rng,
            base_id.clone(),
            params,
            &class_protos,
            &scene_protos,
        );
        annotations.insert(&base_id, &base_id, MAX_RELEVANCE)?;
        let mut references = vec![(base_id.clone(), 0)];
        let mut copies = Vec::new();
        for (k, p) in params.ladder.iter().enumerate() {
            let id = format!("s{s:03}_p{}", k + 1);
            annotations.insert(&base_id, &id, rung_relevance(k + 1, params.ladder.len()))?;
            references.push((id.clone(), k + 1));
            copies.push(perturb(&mut rng, &base, id, *p));
        }
        manifest.images.push(base);
        manifest.images.extend(copies);
        queries.push(SynthQuery {
            query_id: base_id,
            references,
        });
    }
    Ok(SynthDataset {
        manifest,
        annotations,
        queries,
    })
}
