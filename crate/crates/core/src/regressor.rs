//! Trainable regressor from feature vectors to parameter vectors, optimized
//! with mini-batch SGD (momentum, decoupled L2 weight decay, plateau
//! learning-rate decay) under the asymmetric loss.
//!
//! The shipped regressor is affine: one fully-connected layer over
//! externally supplied features. The training loop is written against the
//! [`Regressor`] trait, whose parameter groups carry per-group weight-decay
//! participation and learning-rate multipliers, so a deeper model with
//! slower-trained inner groups can reuse the loop unchanged.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::loss::{asymmetric_loss, asymmetric_loss_grad, LossConfig};
use crate::model::{ParamVector, DEFAULT_SHAPE_DIM, DEFAULT_TEXTURE_DIM};
use crate::pooling::{pool, WeightedEstimate};

/// Supervised samples: one feature row per image, targets shared across all
/// images of a subject.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// `N x D_feat`, one row per sample.
    pub features: DMatrix<f64>,
    pub targets: Vec<ParamVector>,
    pub subject_ids: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyInput("dataset"));
        }
        if self.targets.len() != self.len() {
            return Err(Error::dims("dataset targets", self.len(), self.targets.len()));
        }
        if self.subject_ids.len() != self.len() {
            return Err(Error::dims(
                "dataset subject ids",
                self.len(),
                self.subject_ids.len(),
            ));
        }
        let dims = self.targets[0].dims();
        for t in &self.targets {
            t.ensure_finite()?;
            if t.dims() != dims {
                return Err(Error::dims("dataset target dims", dims.0 + dims.1, t.len()));
            }
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        // All samples of a subject must share the identical target.
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                if self.subject_ids[i] == self.subject_ids[j]
                    && self.targets[i] != self.targets[j]
                {
                    return Err(Error::InvalidInput(format!(
                        "subject {:?} carries differing targets (samples {i} and {j})",
                        self.subject_ids[i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn target_dims(&self) -> (usize, usize) {
        self.targets[0].dims()
    }
}

/// SGD hyperparameters. Defaults: batch 144, momentum 0.9, weight decay
/// 5e-4, learning rate 0.01 decayed by 0.1 after 3 non-improving validation
/// epochs, down to a floor of `lr_head * 1e-4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_head: f64,
    pub lr_decay_factor: f64,
    /// Epochs of non-improving validation loss before each decay.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 144,
            momentum: 0.9,
            weight_decay: 5e-4,
            lr_head: 0.01,
            lr_decay_factor: 0.1,
            patience: 3,
            max_epochs: 100,
            seed: 0,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size >= 1
            && (0.0..1.0).contains(&self.momentum)
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite()
            && self.lr_head > 0.0
            && self.lr_head.is_finite()
            && self.lr_decay_factor > 0.0
            && self.lr_decay_factor < 1.0
            && self.patience >= 1
            && self.max_epochs >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid train config: {self:?}")))
        }
    }

    /// Learning rate below which plateau decay stops the run.
    pub fn lr_floor(&self) -> f64 {
        self.lr_head * 1e-4
    }
}

/// Weight-decay participation and learning-rate multiplier of one parameter
/// group.
#[derive(Debug, Clone, Copy)]
pub struct GroupSpec {
    pub len: usize,
    pub decayed: bool,
    pub lr_multiplier: f64,
}

/// Interface between the SGD loop and a trainable map from features to
/// concatenated coefficients.
pub trait Regressor {
    fn feature_dim(&self) -> usize;
    fn output_len(&self) -> usize;
    fn predict_vector(&self, features: &[f64]) -> DVector<f64>;

    fn group_count(&self) -> usize;
    fn group_spec(&self, group: usize) -> GroupSpec;
    fn copy_group(&self, group: usize, out: &mut [f64]);
    fn set_group(&mut self, group: usize, values: &[f64]);
    /// Accumulates `d(loss)/d(group params)` for one sample into `grads`,
    /// given the loss gradient with respect to the prediction.
    fn accumulate_grads(&self, features: &[f64], output_grad: &[f64], grads: &mut [Vec<f64>]);
}

/// Affine regression head: `prediction = weights^T * features + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegressor {
    /// `D_feat x (K_s + K_t)`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub k_shape: usize,
    pub k_texture: usize,
}

impl LinearRegressor {
    pub fn zeros(feature_dim: usize, k_shape: usize, k_texture: usize) -> Self {
        Self {
            weights: DMatrix::zeros(feature_dim, k_shape + k_texture),
            bias: DVector::zeros(k_shape + k_texture),
            k_shape,
            k_texture,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bias.len() != self.k_shape + self.k_texture
            || self.weights.ncols() != self.bias.len()
        {
            return Err(Error::dims(
                "regressor output",
                self.k_shape + self.k_texture,
                self.weights.ncols(),
            ));
        }
        if self.weights.iter().any(|v| !v.is_finite())
            || self.bias.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("regressor parameters"));
        }
        Ok(())
    }
}

impl Regressor for LinearRegressor {
    fn feature_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn output_len(&self) -> usize {
        self.bias.len()
    }

    fn predict_vector(&self, features: &[f64]) -> DVector<f64> {
        let x = DVector::from_column_slice(features);
        self.weights.tr_mul(&x) + &self.bias
    }

    fn group_count(&self) -> usize {
        2
    }

    fn group_spec(&self, group: usize) -> GroupSpec {
        match group {
            0 => GroupSpec {
                len: self.weights.len(),
                decayed: true,
                lr_multiplier: 1.0,
            },
            1 => GroupSpec {
                len: self.bias.len(),
                decayed: false,
                lr_multiplier: 1.0,
            },
            _ => unreachable!("linear regressor has two parameter groups"),
        }
    }

    fn copy_group(&self, group: usize, out: &mut [f64]) {
        match group {
            0 => out.copy_from_slice(self.weights.as_slice()),
            1 => out.copy_from_slice(self.bias.as_slice()),
            _ => unreachable!(),
        }
    }

    fn set_group(&mut self, group: usize, values: &[f64]) {
        match group {
            0 => self.weights.as_mut_slice().copy_from_slice(values),
            1 => self.bias.as_mut_slice().copy_from_slice(values),
            _ => unreachable!(),
        }
    }

    fn accumulate_grads(&self, features: &[f64], output_grad: &[f64], grads: &mut [Vec<f64>]) {
        let d = self.feature_dim();
        // weights are column-major: entry (i, j) lives at j * d + i.
        for (j, &g) in output_grad.iter().enumerate() {
            let col = &mut grads[0][j * d..(j + 1) * d];
            for (i, &x) in features.iter().enumerate() {
                col[i] += x * g;
            }
            grads[1][j] += g;
        }
    }
}

/// Inference pass of the regression head.
pub fn predict(reg: &LinearRegressor, features: &[f64]) -> Result<ParamVector> {
    if features.len() != reg.feature_dim() {
        return Err(Error::dims("features", reg.feature_dim(), features.len()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("features"));
    }
    let y = reg.predict_vector(features);
    ParamVector::from_concat(y.as_slice(), reg.k_shape)
}

/// One row of the per-epoch training record. Epoch 0 is the pre-training
/// state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Per-epoch train/validation losses and the learning-rate schedule taken.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn final_val_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.val_loss)
    }
}

/// Mean coordinate-summed loss over a dataset.
pub fn dataset_loss<R: Regressor>(reg: &R, data: &Dataset, cfg: &LossConfig) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..data.len() {
        let x = data.features.row(i).transpose();
        let pred = reg.predict_vector(x.as_slice());
        let target = data.targets[i].to_vector();
        total += asymmetric_loss(pred.as_slice(), target.as_slice(), cfg)?;
    }
    Ok(total / data.len() as f64)
}

/// Mean loss and mean parameter gradients over one batch of sample indices.
pub fn batch_loss_and_grads<R: Regressor>(
    reg: &R,
    data: &Dataset,
    batch: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut grads: Vec<Vec<f64>> = (0..reg.group_count())
        .map(|g| vec![0.0; reg.group_spec(g).len])
        .collect();
    let mut loss_sum = 0.0;
    for &i in batch {
        let x = data.features.row(i).transpose();
        let pred = reg.predict_vector(x.as_slice());
        let target = data.targets[i].to_vector();
        loss_sum += asymmetric_loss(pred.as_slice(), target.as_slice(), cfg)?;
        let output_grad = asymmetric_loss_grad(pred.as_slice(), target.as_slice(), cfg)?;
        reg.accumulate_grads(x.as_slice(), output_grad.as_slice(), &mut grads);
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grads {
        for v in g.iter_mut() {
            *v *= scale;
        }
    }
    Ok((loss_sum * scale, grads))
}

/// Runs shuffled mini-batch SGD on `reg`.
///
/// Per step and parameter group: `v = momentum * v + grad`, then
/// `p = p - lr * mult * v - lr * mult * weight_decay * p` for decayed
/// groups (decay is applied to the parameters directly, not through the
/// loss). The learning rate is multiplied by `lr_decay_factor` whenever
/// validation loss has not improved for `patience` epochs, and the run
/// stops once it would fall below [`TrainConfig::lr_floor`] or
/// `max_epochs` is reached. Deterministic for a fixed seed.
pub fn train_regressor<R: Regressor>(
    reg: &mut R,
    data: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    data.validate()?;
    val.validate()?;
    if data.feature_dim() != reg.feature_dim() {
        return Err(Error::dims("train features", reg.feature_dim(), data.feature_dim()));
    }
    if val.feature_dim() != reg.feature_dim() {
        return Err(Error::dims("val features", reg.feature_dim(), val.feature_dim()));
    }
    let out_len = data.targets[0].len();
    if out_len != reg.output_len() {
        return Err(Error::dims("train targets", reg.output_len(), out_len));
    }
    if val.targets[0].len() != reg.output_len() {
        return Err(Error::dims("val targets", reg.output_len(), val.targets[0].len()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocities: Vec<Vec<f64>> = (0..reg.group_count())
        .map(|g| vec![0.0; reg.group_spec(g).len])
        .collect();
    let mut params: Vec<Vec<f64>> = (0..reg.group_count())
        .map(|g| vec![0.0; reg.group_spec(g).len])
        .collect();

    let mut log = TrainLog::default();
    let mut lr = cfg.lr_head;
    log.epochs.push(EpochRecord {
        epoch: 0,
        lr,
        train_loss: dataset_loss(reg, data, &cfg.loss)?,
        val_loss: dataset_loss(reg, val, &cfg.loss)?,
    });

    let mut indices: Vec<usize> = (0..data.len()).collect();
    let mut best_val = log.epochs[0].val_loss;
    let mut stale_epochs = 0usize;

    for epoch in 1..=cfg.max_epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in indices.chunks(cfg.batch_size) {
            let (batch_loss, grads) = batch_loss_and_grads(reg, data, batch, &cfg.loss)?;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            epoch_loss += batch_loss;
            batches += 1;
            for g in 0..reg.group_count() {
                let spec = reg.group_spec(g);
                reg.copy_group(g, &mut params[g]);
                let step = lr * spec.lr_multiplier;
                let decay = if spec.decayed { cfg.weight_decay } else { 0.0 };
                for ((p, v), &grad) in params[g].iter_mut().zip(&mut velocities[g]).zip(&grads[g]) {
                    *v = cfg.momentum * *v + grad;
                    *p -= step * *v + step * decay * *p;
                }
                reg.set_group(g, &params[g]);
            }
        }
        let train_loss = epoch_loss / batches as f64;
        let val_loss = dataset_loss(reg, val, &cfg.loss)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        log.epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss,
        });

        if val_loss < best_val {
            best_val = val_loss;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.patience {
                lr *= cfg.lr_decay_factor;
                stale_epochs = 0;
                if lr < cfg.lr_floor() {
                    break;
                }
            }
        }
    }

    Ok(log)
}

/// Trains a zero-initialized affine regressor.
pub fn train(data: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<(LinearRegressor, TrainLog)> {
    data.validate()?;
    let (k_shape, k_texture) = data.target_dims();
    let mut reg = LinearRegressor::zeros(data.feature_dim(), k_shape, k_texture);
    let log = train_regressor(&mut reg, data, val, cfg)?;
    Ok((reg, log))
}

/// The generative map behind a synthetic task: `features = generator *
/// gamma + noise`.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub train: Dataset,
    pub val: Dataset,
    /// `D_feat x (K_s + K_t)` feature generator.
    pub generator: DMatrix<f64>,
}

/// Sigma schedule shared with the synthetic morphable model: strictly
/// decreasing per-component standard deviations.
pub fn default_gamma_sigmas() -> DVector<f64> {
    let mut sigmas = DVector::zeros(DEFAULT_SHAPE_DIM + DEFAULT_TEXTURE_DIM);
    for k in 0..DEFAULT_SHAPE_DIM {
        sigmas[k] = 25.0 * 0.96f64.powi(k as i32);
    }
    for k in 0..DEFAULT_TEXTURE_DIM {
        sigmas[DEFAULT_SHAPE_DIM + k] = 35.0 * 0.95f64.powi(k as i32);
    }
    sigmas
}

/// Builds a deterministic regression task mimicking the pooled-target
/// pipeline.
///
/// Per subject, a true coefficient vector is drawn from the sigma-scaled
/// Gaussian prior; each of its images contributes features
/// `generator * gamma + noise` (the generator is scaled so noiseless
/// features have unit variance). The per-subject target is the equal-weight
/// pool of the per-image noiseless coefficients, i.e. the subject vector
/// itself. Subjects are split 80/20 into train/validation.
pub fn make_synthetic_task(
    seed: u64,
    n_subjects: usize,
    images_per_subject: usize,
    feature_dim: usize,
    noise_sigma: f64,
) -> Result<SyntheticTask> {
    if n_subjects < 2 || images_per_subject == 0 || feature_dim == 0 {
        return Err(Error::InvalidInput(format!(
            "synthetic task needs >= 2 subjects, >= 1 image each and a positive feature dim \
             (got {n_subjects}, {images_per_subject}, {feature_dim})"
        )));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::InvalidInput(format!("invalid noise sigma {noise_sigma}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigmas = default_gamma_sigmas();
    let gamma_dim = sigmas.len();

    // Column k is scaled by 1 / (sigma_k * sqrt(dim)) so each feature has
    // unit variance under the prior.
    let mut generator = DMatrix::zeros(feature_dim, gamma_dim);
    for k in 0..gamma_dim {
        let scale = 1.0 / (sigmas[k] * (gamma_dim as f64).sqrt());
        for i in 0..feature_dim {
            generator[(i, k)] = scale * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let mut subject_gammas = Vec::with_capacity(n_subjects);
    for _ in 0..n_subjects {
        let gamma = DVector::from_iterator(
            gamma_dim,
            sigmas.iter().map(|&s| s * rng.sample::<f64, _>(StandardNormal)),
        );
        subject_gammas.push(gamma);
    }

    let mut order: Vec<usize> = (0..n_subjects).collect();
    order.shuffle(&mut rng);
    let n_val_subjects = (n_subjects / 5).max(1);

    let mut split = vec![Vec::new(); 2]; // [train rows, val rows]
    let mut rows: Vec<(usize, String, DVector<f64>, ParamVector)> = Vec::new();
    for (pos, &s) in order.iter().enumerate() {
        let part = usize::from(pos < n_val_subjects); // 1 = val
        let subject_id = format!("s{s:04}");
        let gamma = &subject_gammas[s];
        // The pooled target over identical noiseless per-image estimates.
        let estimates: Vec<WeightedEstimate> = (0..images_per_subject)
            .map(|_| {
                WeightedEstimate::equal(
                    ParamVector::from_concat(gamma.as_slice(), DEFAULT_SHAPE_DIM)
                        .expect("gamma has default dims"),
                )
            })
            .collect();
        let target = pool(&estimates)?;
        for _ in 0..images_per_subject {
            let mut features = &generator * gamma;
            if noise_sigma > 0.0 {
                for v in features.iter_mut() {
                    *v += noise_sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
            rows.push((part, subject_id.clone(), features, target.clone()));
        }
    }
    for (i, row) in rows.iter().enumerate() {
        split[row.0].push(i);
    }

    let build = |rows: &[(usize, String, DVector<f64>, ParamVector)], idx: &[usize]| {
        let mut features = DMatrix::zeros(idx.len(), feature_dim);
        let mut targets = Vec::with_capacity(idx.len());
        let mut subject_ids = Vec::with_capacity(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            features.row_mut(r).copy_from(&rows[i].2.transpose());
            subject_ids.push(rows[i].1.clone());
            targets.push(rows[i].3.clone());
        }
        Dataset {
            features,
            targets,
            subject_ids,
        }
    };

    let task = SyntheticTask {
        train: build(&rows, &split[0]),
        val: build(&rows, &split[1]),
        generator,
    };
    task.train.validate()?;
    task.val.validate()?;
    Ok(task)
}
