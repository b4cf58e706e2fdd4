//! Parameter-vector recognition pipeline: benchmark-adaptive PCA, signed
//! square-rooting, cosine similarity and pair/template scoring.
//!
//! The pipeline order is pool -> PCA -> signed sqrt -> cosine. Pooling
//! happens in raw coefficient space, so a template's descriptor is the
//! descriptor of its pooled coefficient vector. `fit_pca` and `embed` are
//! separate so the transform can only be learned from the training split.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::ParamVector;
use crate::pooling::{pool_template, ItemKind, TemplateItem, WeightedEstimate};

/// Mean and orthonormal principal components learned from a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaTransform {
    pub mean: DVector<f64>,
    /// `D x M`, columns in descending eigenvalue order; the
    /// largest-magnitude entry of each column is positive.
    pub components: DMatrix<f64>,
}

impl PcaTransform {
    pub fn input_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.components.ncols()
    }
}

/// Post-PCA, post-signed-sqrt face descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: DVector<f64>,
}

/// Fits a PCA transform with `m` retained components on the training
/// vectors.
///
/// Components are eigenvectors of the sample covariance in descending
/// eigenvalue order, each sign-fixed so its largest-magnitude entry is
/// positive. Deterministic: refitting on the same data reproduces the
/// transform exactly.
pub fn fit_pca(training: &[ParamVector], m: usize) -> Result<PcaTransform> {
    let first = training.first().ok_or(Error::EmptyInput("pca training set"))?;
    let dim = first.len();
    if m == 0 || m > dim {
        return Err(Error::InvalidInput(format!(
            "retained dimension {m} must be in 1..={dim}"
        )));
    }
    if training.len() <= m {
        return Err(Error::InvalidInput(format!(
            "pca needs more than {m} training vectors, got {}",
            training.len()
        )));
    }

    let n = training.len();
    let mut mean = DVector::zeros(dim);
    let mut vectors = Vec::with_capacity(n);
    for (i, p) in training.iter().enumerate() {
        p.ensure_finite()?;
        let v = p.to_vector();
        if v.len() != dim {
            return Err(Error::dims(format!("pca vector {i}"), dim, v.len()));
        }
        mean += &v;
        vectors.push(v);
    }
    mean /= n as f64;

    let mut covariance = DMatrix::zeros(dim, dim);
    for v in &vectors {
        let centered = v - &mean;
        covariance.syger(1.0, &centered, &centered, 1.0);
    }
    covariance /= (n - 1) as f64;
    // syger fills the lower triangle; mirror it.
    for i in 0..dim {
        for j in (i + 1)..dim {
            covariance[(i, j)] = covariance[(j, i)];
        }
    }

    let eigen = SymmetricEigen::new(covariance);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("eigenvalues are finite")
            .then(a.cmp(&b))
    });

    let mut components = DMatrix::zeros(dim, m);
    for (k, &idx) in order.iter().take(m).enumerate() {
        let mut col = eigen.eigenvectors.column(idx).clone_owned();
        // Deterministic sign: largest-magnitude entry positive.
        let mut dominant = 0;
        for i in 1..dim {
            if col[i].abs() > col[dominant].abs() {
                dominant = i;
            }
        }
        if col[dominant] < 0.0 {
            col.neg_mut();
        }
        components.set_column(k, &col);
    }

    Ok(PcaTransform { mean, components })
}

/// Fits PCA retaining `min(dim, N - 1)` components.
pub fn fit_pca_default(training: &[ParamVector]) -> Result<PcaTransform> {
    let first = training.first().ok_or(Error::EmptyInput("pca training set"))?;
    let m = first.len().min(training.len().saturating_sub(1));
    fit_pca(training, m)
}

/// Projects onto the PCA basis and applies the element-wise signed square
/// root `sign(p) * sqrt(|p|)`.
pub fn embed(gamma: &ParamVector, pca: &PcaTransform) -> Result<Descriptor> {
    gamma.ensure_finite()?;
    let v = gamma.to_vector();
    if v.len() != pca.input_dim() {
        return Err(Error::dims("descriptor input", pca.input_dim(), v.len()));
    }
    let projected = pca.components.tr_mul(&(v - &pca.mean));
    let values = projected.map(|p| p.signum() * p.abs().sqrt());
    Ok(Descriptor { values })
}

/// Cosine similarity in `[-1, 1]`. Zero-norm descriptors are an error: they
/// indicate a degenerate upstream estimate.
pub fn similarity(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(Error::dims("descriptors", a.values.len(), b.values.len()));
    }
    let norm_sq_a = a.values.norm_squared();
    let norm_sq_b = b.values.norm_squared();
    if norm_sq_a == 0.0 || norm_sq_b == 0.0 {
        return Err(Error::ZeroNorm);
    }
    // sqrt of the product keeps identical inputs at exactly 1.0.
    Ok((a.values.dot(&b.values) / (norm_sq_a * norm_sq_b).sqrt()).clamp(-1.0, 1.0))
}

/// Ground-truth relation of a verification pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    Same,
    Diff,
}

impl PairLabel {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "same" | "1" | "true" => Ok(PairLabel::Same),
            "diff" | "different" | "0" | "false" => Ok(PairLabel::Diff),
            other => Err(Error::InvalidInput(format!(
                "unknown pair label {other:?} (expected same or diff)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PairLabel::Same => "same",
            PairLabel::Diff => "diff",
        }
    }
}

/// One verification protocol entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub id_a: String,
    pub id_b: String,
    pub label: PairLabel,
}

pub type PairList = Vec<Pair>;

/// A scored protocol pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScore {
    pub id_a: String,
    pub id_b: String,
    pub label: PairLabel,
    pub score: f64,
}

/// Labeled similarity scores in protocol order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub entries: Vec<LabeledScore>,
}

impl ScoreSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Scores every protocol pair against the descriptor map, preserving pair
/// order. Unresolved ids are reported with the offending pair index.
pub fn score_pairs(
    protocol: &[Pair],
    descriptors: &BTreeMap<String, Descriptor>,
) -> Result<ScoreSet> {
    let mut entries = Vec::with_capacity(protocol.len());
    for (index, pair) in protocol.iter().enumerate() {
        let a = descriptors.get(&pair.id_a).ok_or_else(|| Error::MissingId {
            pair_index: index,
            id: pair.id_a.clone(),
        })?;
        let b = descriptors.get(&pair.id_b).ok_or_else(|| Error::MissingId {
            pair_index: index,
            id: pair.id_b.clone(),
        })?;
        entries.push(LabeledScore {
            id_a: pair.id_a.clone(),
            id_b: pair.id_b.clone(),
            label: pair.label,
            score: similarity(a, b)?,
        });
    }
    Ok(ScoreSet { entries })
}

/// Item membership of one template.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateDef {
    pub template_id: String,
    pub item_id: String,
    pub kind: ItemKind,
}

/// Pools each template's items in raw coefficient space (videos first,
/// then items with equal weights) and returns one coefficient vector per
/// template id.
pub fn pool_templates(
    defs: &[TemplateDef],
    estimates_by_item: &BTreeMap<String, Vec<WeightedEstimate>>,
) -> Result<BTreeMap<String, ParamVector>> {
    let mut grouped: BTreeMap<String, Vec<&TemplateDef>> = BTreeMap::new();
    for def in defs {
        grouped.entry(def.template_id.clone()).or_default().push(def);
    }

    let mut pooled = BTreeMap::new();
    for (template_id, members) in grouped {
        let mut items = Vec::with_capacity(members.len());
        for def in members {
            let estimates = estimates_by_item.get(&def.item_id).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "template {template_id:?} references unknown item {:?}",
                    def.item_id
                ))
            })?;
            items.push(TemplateItem {
                kind: def.kind,
                estimates: estimates.clone(),
            });
        }
        pooled.insert(template_id, pool_template(&items)?);
    }
    Ok(pooled)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(values: &[f64]) -> ParamVector {
        let k = values.len() / 2;
        ParamVector::from_concat(values, k).unwrap()
    }

    #[test]
    fn rank_one_data_recovers_the_line() {
        let direction = [3.0, -1.0, 0.5, 2.0];
        let training: Vec<ParamVector> = (0..12)
            .map(|i| {
                let t = i as f64 - 5.5;
                param(&direction.map(|d| 10.0 + t * d))
            })
            .collect();
        let pca = fit_pca(&training, 1).unwrap();
        let dir = DVector::from_column_slice(&direction).normalize();
        let dot = pca.components.column(0).dot(&dir).abs();
        assert!(dot > 1.0 - 1e-8, "alignment {dot}");
    }

    #[test]
    fn refit_is_deterministic() {
        let training: Vec<ParamVector> = (0..20)
            .map(|i| {
                let x = i as f64;
                param(&[x.sin(), (2.0 * x).cos(), 0.1 * x, x.sqrt()])
            })
            .collect();
        let a = fit_pca(&training, 3).unwrap();
        let b = fit_pca(&training, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn components_are_orthonormal() {
        let training: Vec<ParamVector> = (0..30)
            .map(|i| {
                let x = i as f64 * 0.7;
                param(&[x.sin(), x.cos(), (0.3 * x).sin(), (1.7 * x).cos()])
            })
            .collect();
        let pca = fit_pca(&training, 4).unwrap();
        let gram = pca.components.tr_mul(&pca.components);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expected).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn fit_rejects_insufficient_samples_and_bad_m() {
        let training: Vec<ParamVector> = (0..3).map(|i| param(&[i as f64, 0.0])).collect();
        assert!(fit_pca(&training, 3).is_err());
        assert!(fit_pca(&training, 0).is_err());
        assert!(fit_pca(&[], 1).is_err());
    }

    #[test]
    fn embed_of_mean_is_zero() {
        let training: Vec<ParamVector> =
            (0..10).map(|i| param(&[i as f64, 1.0 - i as f64])).collect();
        let pca = fit_pca(&training, 1).unwrap();
        let mean = ParamVector::from_concat(pca.mean.as_slice(), 1).unwrap();
        let d = embed(&mean, &pca).unwrap();
        assert_eq!(d.values.amax(), 0.0);
    }

    #[test]
    fn signed_sqrt_hand_case() {
        // Projection (4, -9) -> (2, -3) under an identity-like transform.
        let pca = PcaTransform {
            mean: DVector::zeros(2),
            components: DMatrix::identity(2, 2),
        };
        let d = embed(&param(&[4.0, -9.0]), &pca).unwrap();
        assert_eq!(d.values.as_slice(), &[2.0, -3.0]);
    }

    #[test]
    fn embed_is_odd_around_the_mean() {
        let training: Vec<ParamVector> = (0..10)
            .map(|i| param(&[i as f64, (i * i) as f64 * 0.1, -(i as f64), 2.0]))
            .collect();
        let pca = fit_pca(&training, 2).unwrap();
        let delta = DVector::from_vec(vec![0.7, -1.1, 0.3, 0.9]);
        let plus = ParamVector::from_concat((&pca.mean + &delta).as_slice(), 2).unwrap();
        let minus = ParamVector::from_concat((&pca.mean - &delta).as_slice(), 2).unwrap();
        let dp = embed(&plus, &pca).unwrap();
        let dm = embed(&minus, &pca).unwrap();
        assert!((dp.values + dm.values).amax() < 1e-12);
    }

    #[test]
    fn similarity_basics() {
        let a = Descriptor {
            values: DVector::from_vec(vec![1.0, 0.0]),
        };
        let b = Descriptor {
            values: DVector::from_vec(vec![0.0, 2.0]),
        };
        assert_eq!(similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(similarity(&a, &b).unwrap(), 0.0);
        let scaled = Descriptor {
            values: &a.values * 7.5,
        };
        assert_eq!(similarity(&a, &scaled).unwrap(), 1.0);
        let negated = Descriptor {
            values: &a.values * -2.0,
        };
        assert_eq!(similarity(&a, &negated).unwrap(), -1.0);
    }

    #[test]
    fn similarity_is_symmetric() {
        let a = Descriptor {
            values: DVector::from_vec(vec![0.3, -0.8, 0.1]),
        };
        let b = Descriptor {
            values: DVector::from_vec(vec![-0.5, 0.4, 2.0]),
        };
        assert_eq!(similarity(&a, &b).unwrap(), similarity(&b, &a).unwrap());
    }

    #[test]
    fn zero_norm_descriptor_is_an_error() {
        let a = Descriptor {
            values: DVector::zeros(3),
        };
        let b = Descriptor {
            values: DVector::from_vec(vec![1.0, 0.0, 0.0]),
        };
        assert!(matches!(similarity(&a, &b), Err(Error::ZeroNorm)));
    }

    #[test]
    fn score_pairs_reports_missing_ids_with_pair_index() {
        let mut descriptors = BTreeMap::new();
        descriptors.insert(
            "a".to_string(),
            Descriptor {
                values: DVector::from_vec(vec![1.0]),
            },
        );
        let protocol = vec![
            Pair {
                id_a: "a".into(),
                id_b: "a".into(),
                label: PairLabel::Same,
            },
            Pair {
                id_a: "a".into(),
                id_b: "ghost".into(),
                label: PairLabel::Diff,
            },
        ];
        match score_pairs(&protocol, &descriptors) {
            Err(Error::MissingId { pair_index, id }) => {
                assert_eq!(pair_index, 1);
                assert_eq!(id, "ghost");
            }
            other => panic!("expected MissingId, got {other:?}"),
        }
    }

    #[test]
    fn identical_id_pair_scores_one() {
        let mut descriptors = BTreeMap::new();
        descriptors.insert(
            "x".to_string(),
            Descriptor {
                values: DVector::from_vec(vec![0.4, -1.0]),
            },
        );
        let protocol = vec![Pair {
            id_a: "x".into(),
            id_b: "x".into(),
            label: PairLabel::Same,
        }];
        let scores = score_pairs(&protocol, &descriptors).unwrap();
        assert_eq!(scores.entries[0].score, 1.0);
    }

    #[test]
    fn empty_protocol_gives_empty_scores() {
        let descriptors = BTreeMap::new();
        assert!(score_pairs(&[], &descriptors).unwrap().is_empty());
    }
}
