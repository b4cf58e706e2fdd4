//! Property tests for weighted pooling.

use mm3d_core::model::ParamVector;
use mm3d_core::pooling::{pool, pool_template, TemplateItem, WeightedEstimate};
use nalgebra::DVector;
use proptest::prelude::*;

fn estimates_strategy() -> impl Strategy<Value = Vec<WeightedEstimate>> {
    // 1..8 estimates over a shared 4-dimensional code, weights in [0, 10]
    // with at least one strictly positive.
    (1usize..8).prop_flat_map(|n| {
        (
            proptest::collection::vec(
                proptest::collection::vec(-100.0f64..100.0, 4),
                n,
            ),
            proptest::collection::vec(0.01f64..10.0, n),
        )
            .prop_map(|(gammas, weights)| {
                gammas
                    .into_iter()
                    .zip(weights)
                    .map(|(g, w)| {
                        WeightedEstimate::new(
                            ParamVector::from_concat(&g, 2).unwrap(),
                            w,
                        )
                    })
                    .collect()
            })
    })
}

proptest! {
    #[test]
    fn weight_scale_invariance(estimates in estimates_strategy(), c in 0.001f64..1000.0) {
        let scaled: Vec<WeightedEstimate> = estimates
            .iter()
            .map(|e| WeightedEstimate::new(e.gamma.clone(), e.weight * c))
            .collect();
        let a = pool(&estimates).unwrap().to_vector();
        let b = pool(&scaled).unwrap().to_vector();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0));
        }
    }

    #[test]
    fn output_stays_in_the_coordinate_wise_hull(estimates in estimates_strategy()) {
        let pooled = pool(&estimates).unwrap().to_vector();
        for k in 0..4 {
            let lo = estimates
                .iter()
                .map(|e| e.gamma.to_vector()[k])
                .fold(f64::INFINITY, f64::min);
            let hi = estimates
                .iter()
                .map(|e| e.gamma.to_vector()[k])
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(pooled[k] >= lo - 1e-9 && pooled[k] <= hi + 1e-9);
        }
    }

    #[test]
    fn permutation_invariance(estimates in estimates_strategy(), seed in 0u64..1000) {
        let mut shuffled = estimates.clone();
        // Deterministic Fisher-Yates driven by the seed.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let a = pool(&estimates).unwrap().to_vector();
        let b = pool(&shuffled).unwrap().to_vector();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn identical_estimates_are_a_fixed_point(
        gamma in proptest::collection::vec(-50.0f64..50.0, 4),
        weights in proptest::collection::vec(0.1f64..5.0, 1..6),
    ) {
        let g = ParamVector::from_concat(&gamma, 2).unwrap();
        let estimates: Vec<WeightedEstimate> = weights
            .iter()
            .map(|&w| WeightedEstimate::new(g.clone(), w))
            .collect();
        let pooled = pool(&estimates).unwrap().to_vector();
        let expected = g.to_vector();
        for (x, y) in pooled.iter().zip(expected.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn all_still_template_pooling_equals_flat_equal_weight_pool(
        gammas in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 4), 1..6),
    ) {
        let stills: Vec<TemplateItem> = gammas
            .iter()
            .map(|g| {
                TemplateItem::still(WeightedEstimate::equal(
                    ParamVector::from_concat(g, 2).unwrap(),
                ))
            })
            .collect();
        let flat: Vec<WeightedEstimate> = gammas
            .iter()
            .map(|g| WeightedEstimate::equal(ParamVector::from_concat(g, 2).unwrap()))
            .collect();
        let a = pool_template(&stills).unwrap().to_vector();
        let b = pool(&flat).unwrap().to_vector();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn two_stage_hand_case_is_exact() {
    let gamma = |a: f64, b: f64| {
        ParamVector::new(DVector::from_vec(vec![a]), DVector::from_vec(vec![b]))
    };
    let video = TemplateItem::video(vec![
        WeightedEstimate::equal(gamma(0.0, 0.0)),
        WeightedEstimate::equal(gamma(2.0, 2.0)),
    ]);
    let still = TemplateItem::still(WeightedEstimate::equal(gamma(4.0, 0.0)));
    let pooled = pool_template(&[video, still]).unwrap();
    assert_eq!(pooled.alpha[0], 2.5);
    assert_eq!(pooled.beta[0], 0.5);
}
