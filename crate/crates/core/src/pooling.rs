//! Confidence-weighted aggregation of per-image parameter estimates into a
//! single subject- or template-level estimate.
//!
//! Weights are accepted unnormalized and normalized internally, so callers
//! may pass raw detector confidences. Templates mixing stills and videos
//! are pooled in two stages: frames within each video first (equal
//! weights), then the per-item results (equal weights).

use crate::error::{Error, Result};
use crate::model::ParamVector;

/// A parameter estimate with its aggregation weight.
#[derive(Debug, Clone)]
pub struct WeightedEstimate {
    pub gamma: ParamVector,
    /// Non-negative confidence; 1.0 for estimates without a detector score.
    pub weight: f64,
}

impl WeightedEstimate {
    pub fn new(gamma: ParamVector, weight: f64) -> Self {
        Self { gamma, weight }
    }

    /// Unit weight, for estimators that do not produce confidences.
    pub fn equal(gamma: ParamVector) -> Self {
        Self { gamma, weight: 1.0 }
    }
}

/// Media kind of one template item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemKind {
    StillImage,
    Video,
}

impl ItemKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "still" | "still_image" | "image" => Ok(ItemKind::StillImage),
            "video" => Ok(ItemKind::Video),
            other => Err(Error::InvalidInput(format!(
                "unknown item kind {other:?} (expected still or video)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ItemKind::StillImage => "still",
            ItemKind::Video => "video",
        }
    }
}

/// One entry of a template: a still image or a video with per-frame
/// estimates.
#[derive(Debug, Clone)]
pub struct TemplateItem {
    pub kind: ItemKind,
    pub estimates: Vec<WeightedEstimate>,
}

impl TemplateItem {
    pub fn still(estimate: WeightedEstimate) -> Self {
        Self {
            kind: ItemKind::StillImage,
            estimates: vec![estimate],
        }
    }

    pub fn video(frames: Vec<WeightedEstimate>) -> Self {
        Self {
            kind: ItemKind::Video,
            estimates: frames,
        }
    }
}

/// Weighted element-wise average of the estimates.
///
/// Weights are normalized to sum to one internally. All-zero weights are an
/// error: they signal upstream detector failure rather than a request for
/// equal weighting.
pub fn pool(estimates: &[WeightedEstimate]) -> Result<ParamVector> {
    let first = estimates.first().ok_or(Error::EmptyInput("estimate list"))?;
    let dims = first.gamma.dims();

    let mut total = 0.0;
    for (i, e) in estimates.iter().enumerate() {
        if !e.weight.is_finite() || e.weight < 0.0 {
            return Err(Error::InvalidInput(format!(
                "estimate {i} has invalid weight {}",
                e.weight
            )));
        }
        e.gamma.ensure_finite()?;
        if e.gamma.dims() != dims {
            return Err(Error::dims(
                format!("estimate {i} parameters"),
                dims.0 + dims.1,
                e.gamma.len(),
            ));
        }
        total += e.weight;
    }
    if total <= 0.0 {
        return Err(Error::InvalidInput(
            "all pooling weights are zero".into(),
        ));
    }

    let mut pooled = ParamVector::zeros(dims.0, dims.1);
    for e in estimates {
        let w = e.weight / total;
        pooled.alpha.axpy(w, &e.gamma.alpha, 1.0);
        pooled.beta.axpy(w, &e.gamma.beta, 1.0);
    }
    Ok(pooled)
}

/// Two-stage template pooling: videos are reduced to one estimate each
/// (equal frame weights), then all items are pooled with equal weights.
pub fn pool_template(items: &[TemplateItem]) -> Result<ParamVector> {
    if items.is_empty() {
        return Err(Error::EmptyInput("template"));
    }

    let mut per_item = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        match item.kind {
            ItemKind::StillImage => {
                if item.estimates.len() != 1 {
                    return Err(Error::InvalidInput(format!(
                        "still item {i} carries {} estimates, expected 1",
                        item.estimates.len()
                    )));
                }
                item.estimates[0].gamma.ensure_finite()?;
                per_item.push(item.estimates[0].gamma.clone());
            }
            ItemKind::Video => {
                let frames: Vec<WeightedEstimate> = item
                    .estimates
                    .iter()
                    .map(|e| WeightedEstimate::equal(e.gamma.clone()))
                    .collect();
                per_item.push(pool(&frames)?);
            }
        }
    }

    let equal: Vec<WeightedEstimate> =
        per_item.into_iter().map(WeightedEstimate::equal).collect();
    pool(&equal)
}
