//! Descriptor pipeline checks: PCA sampling statistics, per-pair score
//! recomputation and template-pooling equivalence.

use std::collections::BTreeMap;

use mm3d_core::matching::{
    embed, fit_pca, pool_templates, score_pairs, similarity, Pair, PairLabel, TemplateDef,
};
use mm3d_core::model::ParamVector;
use mm3d_core::pooling::{pool_template, ItemKind, TemplateItem, WeightedEstimate};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_params(rng: &mut ChaCha8Rng, dim: usize) -> ParamVector {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    ParamVector::from_concat(&v, dim / 2).unwrap()
}

#[test]
fn isotropic_data_spreads_variance_evenly_across_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dim = 4;
    let n = 40_000;
    let training: Vec<ParamVector> = (0..n).map(|_| gaussian_params(&mut rng, dim)).collect();
    let pca = fit_pca(&training, dim).unwrap();

    // Projected variance per retained component, computed directly.
    let mut variances = vec![0.0; dim];
    for p in &training {
        let centered = p.to_vector() - &pca.mean;
        let projected = pca.components.tr_mul(&centered);
        for k in 0..dim {
            variances[k] += projected[k] * projected[k];
        }
    }
    for v in variances.iter_mut() {
        *v /= (n - 1) as f64;
    }

    let max = variances.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = variances.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(
        max / min < 1.10,
        "retained variances {variances:?} spread beyond 10%"
    );
    // And they are in descending order by construction.
    for w in variances.windows(2) {
        assert!(w[0] >= w[1] - 1e-12);
    }
}

#[test]
fn scores_match_per_pair_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dim = 10;
    let training: Vec<ParamVector> = (0..50).map(|_| gaussian_params(&mut rng, dim)).collect();
    let pca = fit_pca(&training, 6).unwrap();

    let mut descriptors = BTreeMap::new();
    let ids: Vec<String> = (0..8).map(|i| format!("id{i}")).collect();
    for id in &ids {
        let gamma = gaussian_params(&mut rng, dim);
        descriptors.insert(id.clone(), embed(&gamma, &pca).unwrap());
    }

    let protocol: Vec<Pair> = (0..8)
        .flat_map(|a| (0..8).map(move |b| (a, b)))
        .filter(|(a, b)| a < b)
        .map(|(a, b)| Pair {
            id_a: ids[a].clone(),
            id_b: ids[b].clone(),
            label: if a % 2 == b % 2 { PairLabel::Same } else { PairLabel::Diff },
        })
        .collect();

    let scores = score_pairs(&protocol, &descriptors).unwrap();
    assert_eq!(scores.len(), protocol.len());
    for (entry, pair) in scores.entries.iter().zip(&protocol) {
        let expected = similarity(&descriptors[&pair.id_a], &descriptors[&pair.id_b]).unwrap();
        assert_eq!(entry.score, expected);
        assert_eq!(entry.label, pair.label);
    }
}

#[test]
fn scoring_a_video_template_equals_scoring_its_pooled_code() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let dim = 8;
    let training: Vec<ParamVector> = (0..40).map(|_| gaussian_params(&mut rng, dim)).collect();
    let pca = fit_pca(&training, 5).unwrap();

    // A template holding one video (3 frames) and one still.
    let frames: Vec<WeightedEstimate> = (0..3)
        .map(|_| WeightedEstimate::equal(gaussian_params(&mut rng, dim)))
        .collect();
    let still = WeightedEstimate::equal(gaussian_params(&mut rng, dim));
    let other = gaussian_params(&mut rng, dim);

    let items = vec![TemplateItem::video(frames.clone()), TemplateItem::still(still.clone())];
    let pooled = pool_template(&items).unwrap();

    // Route 1: template machinery end to end.
    let defs = vec![
        TemplateDef {
            template_id: "t".into(),
            item_id: "vid".into(),
            kind: ItemKind::Video,
        },
        TemplateDef {
            template_id: "t".into(),
            item_id: "img".into(),
            kind: ItemKind::StillImage,
        },
    ];
    let mut estimates_by_item = BTreeMap::new();
    estimates_by_item.insert("vid".to_string(), frames);
    estimates_by_item.insert("img".to_string(), vec![still]);
    let pooled_by_template = pool_templates(&defs, &estimates_by_item).unwrap();

    let d_template = embed(&pooled_by_template["t"], &pca).unwrap();
    let d_pooled = embed(&pooled, &pca).unwrap();
    let d_other = embed(&other, &pca).unwrap();

    let via_template = similarity(&d_template, &d_other).unwrap();
    let via_pooled = similarity(&d_pooled, &d_other).unwrap();
    assert!(
        (via_template - via_pooled).abs() < 1e-12,
        "template route {via_template} vs pooled route {via_pooled}"
    );
}

#[test]
fn descriptor_scaling_leaves_scores_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let dim = 6;
    let training: Vec<ParamVector> = (0..30).map(|_| gaussian_params(&mut rng, dim)).collect();
    let pca = fit_pca(&training, 4).unwrap();

    let a = embed(&gaussian_params(&mut rng, dim), &pca).unwrap();
    let b = embed(&gaussian_params(&mut rng, dim), &pca).unwrap();
    let base = similarity(&a, &b).unwrap();
    for c in [0.25, 4.0, 1e6] {
        let scaled_a = mm3d_core::matching::Descriptor {
            values: &a.values * c,
        };
        let scaled_b = mm3d_core::matching::Descriptor {
            values: &b.values * c,
        };
        let s = similarity(&scaled_a, &scaled_b).unwrap();
        assert!((s - base).abs() < 1e-12);
    }
}
