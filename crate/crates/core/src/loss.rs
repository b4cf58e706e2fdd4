//! Asymmetric Euclidean loss and its analytic gradient.
//!
//! The loss decouples over- from under-estimation per coordinate through a
//! sign-coupled max decomposition: with `t+ = |target|`,
//! `p+ = sign(target) * pred` and `m = max(t+, p+)`,
//!
//! ```text
//! loss = lambda_over * sum((t+ - m)^2) + lambda_under * sum((p+ - m)^2)
//! ```
//!
//! Predictions closer to the origin than the target (under-estimates) fall
//! into the second term, so `lambda_under > lambda_over` penalizes shrinkage
//! toward the mean face more heavily. With both weights equal to 1 the loss
//! reduces to the squared Euclidean distance.
//!
//! Conventions, frozen for reproducibility: `sign(0) = +1`, and the
//! subgradient at the per-coordinate kink `p+ = t+` is 0, so exact hits are
//! stationary under SGD.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::ParamVector;

/// Over/under-estimation weights (`lambda_over`, `lambda_under`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    lambda_over: f64,
    lambda_under: f64,
}

impl LossConfig {
    /// Both weights must be finite and non-negative, and not both zero.
    pub fn new(lambda_over: f64, lambda_under: f64) -> Result<Self> {
        let valid = lambda_over.is_finite()
            && lambda_under.is_finite()
            && lambda_over >= 0.0
            && lambda_under >= 0.0
            && (lambda_over > 0.0 || lambda_under > 0.0);
        if !valid {
            return Err(Error::InvalidInput(format!(
                "loss weights ({lambda_over}, {lambda_under}) must be finite, non-negative and not both zero"
            )));
        }
        Ok(Self {
            lambda_over,
            lambda_under,
        })
    }

    /// Plain squared Euclidean distance.
    pub fn euclidean() -> Self {
        Self {
            lambda_over: 1.0,
            lambda_under: 1.0,
        }
    }

    pub fn lambda_over(&self) -> f64 {
        self.lambda_over
    }

    pub fn lambda_under(&self) -> f64 {
        self.lambda_under
    }
}

impl Default for LossConfig {
    /// The weighting used throughout this toolkit: under-estimation three
    /// times as costly as over-estimation.
    fn default() -> Self {
        Self {
            lambda_over: 1.0,
            lambda_under: 3.0,
        }
    }
}

fn sign_plus(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn check_inputs(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::dims("loss inputs", target.len(), pred.len()));
    }
    if pred.iter().chain(target.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss inputs"));
    }
    Ok(())
}

/// Coordinate-summed asymmetric loss between a prediction and its target.
pub fn asymmetric_loss(pred: &[f64], target: &[f64], cfg: &LossConfig) -> Result<f64> {
    check_inputs(pred, target)?;
    let mut over = 0.0;
    let mut under = 0.0;
    for (&p, &t) in pred.iter().zip(target) {
        let s = sign_plus(t);
        let t_plus = s * t;
        let p_plus = s * p;
        let m = t_plus.max(p_plus);
        over += (t_plus - m) * (t_plus - m);
        under += (p_plus - m) * (p_plus - m);
    }
    Ok(cfg.lambda_over * over + cfg.lambda_under * under)
}

/// Gradient of [`asymmetric_loss`] with respect to the prediction.
pub fn asymmetric_loss_grad(pred: &[f64], target: &[f64], cfg: &LossConfig) -> Result<DVector<f64>> {
    check_inputs(pred, target)?;
    let mut grad = DVector::zeros(pred.len());
    for (i, (&p, &t)) in pred.iter().zip(target).enumerate() {
        let s = sign_plus(t);
        let t_plus = s * t;
        let p_plus = s * p;
        grad[i] = if p_plus > t_plus {
            2.0 * cfg.lambda_over * (p_plus - t_plus) * s
        } else if p_plus < t_plus {
            2.0 * cfg.lambda_under * (p_plus - t_plus) * s
        } else {
            0.0
        };
    }
    Ok(grad)
}

/// [`asymmetric_loss`] over the concatenated coefficients of two
/// [`ParamVector`]s.
pub fn asymmetric_loss_params(
    pred: &ParamVector,
    target: &ParamVector,
    cfg: &LossConfig,
) -> Result<f64> {
    asymmetric_loss(
        pred.to_vector().as_slice(),
        target.to_vector().as_slice(),
        cfg,
    )
}

/// Central finite-difference gradient of [`asymmetric_loss`], for checking
/// the analytic gradient.
pub fn finite_difference_grad(
    pred: &[f64],
    target: &[f64],
    cfg: &LossConfig,
    step: f64,
) -> Result<DVector<f64>> {
    check_inputs(pred, target)?;
    let mut grad = DVector::zeros(pred.len());
    let mut probe = pred.to_vec();
    for i in 0..pred.len() {
        probe[i] = pred[i] + step;
        let plus = asymmetric_loss(&probe, target, cfg)?;
        probe[i] = pred[i] - step;
        let minus = asymmetric_loss(&probe, target, cfg)?;
        probe[i] = pred[i];
        grad[i] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// Outcome of a randomized analytic-vs-numeric gradient comparison.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub points_tested: usize,
    /// Max over coordinates of `|fd - analytic| / max(1, |fd|, |analytic|)`.
    pub max_relative_error: f64,
}

/// Kink-rejection margin for sampled gradient checks. Central differences
/// with step `h` straddle the per-coordinate kink whenever
/// `|p+ - t+| < h`, so sampled points must keep a wider margin than the
/// step itself.
pub const GRADCHECK_KINK_MARGIN: f64 = 1e-4;

/// Compares the analytic gradient to central finite differences at `points`
/// random coordinates-regular points of the given dimension, rejecting
/// samples with any coordinate closer than [`GRADCHECK_KINK_MARGIN`] to its
/// kink.
pub fn gradient_check(
    seed: u64,
    dim: usize,
    cfg: &LossConfig,
    points: usize,
    step: f64,
) -> Result<GradCheckReport> {
    if dim == 0 || points == 0 {
        return Err(Error::InvalidInput("gradcheck needs dim > 0 and points > 0".into()));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput(format!("invalid step {step}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel = 0.0f64;
    let mut tested = 0;
    while tested < points {
        let target: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let pred: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let near_kink = pred.iter().zip(&target).any(|(&p, &t)| {
            let s = sign_plus(t);
            (s * p - s * t).abs() < GRADCHECK_KINK_MARGIN
        });
        if near_kink {
            continue;
        }
        let analytic = asymmetric_loss_grad(&pred, &target, cfg)?;
        let numeric = finite_difference_grad(&pred, &target, cfg, step)?;
        for i in 0..dim {
            let denom = 1.0f64.max(analytic[i].abs()).max(numeric[i].abs());
            max_rel = max_rel.max((analytic[i] - numeric[i]).abs() / denom);
        }
        tested += 1;
    }

    Ok(GradCheckReport {
        points_tested: tested,
        max_relative_error: max_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_prediction_has_zero_loss_and_grad() {
        let cfg = LossConfig::default();
        let v = [0.5, -2.0, 0.0, 3.25];
        assert_eq!(asymmetric_loss(&v, &v, &cfg).unwrap(), 0.0);
        assert_eq!(asymmetric_loss_grad(&v, &v, &cfg).unwrap().amax(), 0.0);
    }

    #[test]
    fn under_estimate_hand_case() {
        // target 2, pred 1: t+ = 2, p+ = 1, m = 2 -> 1*0 + 3*1 = 3.
        let cfg = LossConfig::new(1.0, 3.0).unwrap();
        assert_eq!(asymmetric_loss(&[1.0], &[2.0], &cfg).unwrap(), 3.0);
    }

    #[test]
    fn over_estimate_hand_case() {
        // target 1, pred 2: t+ = 1, p+ = 2, m = 2 -> 1*1 + 3*0 = 1.
        let cfg = LossConfig::new(1.0, 3.0).unwrap();
        assert_eq!(asymmetric_loss(&[2.0], &[1.0], &cfg).unwrap(), 1.0);
    }

    #[test]
    fn under_estimate_gradient_hand_case() {
        // d = 2 * 3 * (1 - 2) * 1 = -6.
        let cfg = LossConfig::new(1.0, 3.0).unwrap();
        let g = asymmetric_loss_grad(&[1.0], &[2.0], &cfg).unwrap();
        assert_eq!(g[0], -6.0);
    }

    #[test]
    fn equal_weights_reduce_to_euclidean() {
        let cfg = LossConfig::euclidean();
        let pred = [0.3, -1.2, 4.0, 0.0, -0.7];
        let target = [1.0, -0.2, 3.5, 0.4, -2.0];
        let loss = asymmetric_loss(&pred, &target, &cfg).unwrap();
        let euclid: f64 = pred
            .iter()
            .zip(&target)
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        assert!((loss - euclid).abs() <= 1e-12 * euclid);
    }

    #[test]
    fn reflection_symmetry_is_exact() {
        let cfg = LossConfig::default();
        let pred = [0.3, -1.2, 4.0, 0.0];
        let target = [1.0, -0.2, -3.5, 0.4];
        let neg_pred: Vec<f64> = pred.iter().map(|v| -v).collect();
        let neg_target: Vec<f64> = target.iter().map(|v| -v).collect();
        assert_eq!(
            asymmetric_loss(&pred, &target, &cfg).unwrap(),
            asymmetric_loss(&neg_pred, &neg_target, &cfg).unwrap()
        );
    }

    #[test]
    fn coordinate_separability() {
        let cfg = LossConfig::default();
        let pred = [0.9, -2.0, 0.1];
        let target = [1.0, -1.0, -0.3];
        let total = asymmetric_loss(&pred, &target, &cfg).unwrap();
        let by_parts: f64 = pred
            .iter()
            .zip(&target)
            .map(|(&p, &t)| asymmetric_loss(&[p], &[t], &cfg).unwrap())
            .sum();
        assert!((total - by_parts).abs() < 1e-15);
    }

    #[test]
    fn zero_target_uses_positive_sign() {
        // sign(0) = +1: a positive prediction over a zero target is an
        // over-estimate, a negative one an under-estimate.
        let cfg = LossConfig::new(1.0, 3.0).unwrap();
        assert_eq!(asymmetric_loss(&[0.5], &[0.0], &cfg).unwrap(), 0.25);
        assert_eq!(asymmetric_loss(&[-0.5], &[0.0], &cfg).unwrap(), 0.75);
    }

    #[test]
    fn rejects_dimension_mismatch_and_non_finite() {
        let cfg = LossConfig::default();
        assert!(asymmetric_loss(&[1.0], &[1.0, 2.0], &cfg).is_err());
        assert!(asymmetric_loss(&[f64::INFINITY], &[1.0], &cfg).is_err());
        assert!(asymmetric_loss_grad(&[1.0], &[f64::NAN], &cfg).is_err());
    }

    #[test]
    fn config_rejects_invalid_weights() {
        assert!(LossConfig::new(0.0, 0.0).is_err());
        assert!(LossConfig::new(-1.0, 3.0).is_err());
        assert!(LossConfig::new(f64::NAN, 3.0).is_err());
        assert!(LossConfig::new(0.0, 3.0).is_ok());
    }

    #[test]
    fn gradient_check_passes_away_from_kinks() {
        let cfg = LossConfig::default();
        let report = gradient_check(9, 16, &cfg, 200, 1e-5).unwrap();
        assert_eq!(report.points_tested, 200);
        assert!(
            report.max_relative_error < 1e-5,
            "max relative error {}",
            report.max_relative_error
        );
    }
}
