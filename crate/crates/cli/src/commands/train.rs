use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use mm3d_core::io::csvio::{create, open, read_dataset, write_trainlog_csv};
use mm3d_core::io::save_regressor;
use mm3d_core::loss::LossConfig;
use mm3d_core::regressor::{train, Dataset, TrainConfig};

use crate::config::{echo, load_file, need, pick, usage};
use crate::TrainArgs;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileCfg {
    features: Option<PathBuf>,
    targets: Option<PathBuf>,
    val_features: Option<PathBuf>,
    val_targets: Option<PathBuf>,
    val_fraction: Option<f64>,
    batch_size: Option<usize>,
    momentum: Option<f64>,
    weight_decay: Option<f64>,
    lr: Option<f64>,
    lr_decay_factor: Option<f64>,
    patience: Option<usize>,
    max_epochs: Option<usize>,
    seed: Option<u64>,
    lambda_over: Option<f64>,
    lambda_under: Option<f64>,
    out_checkpoint: Option<PathBuf>,
    out_log: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    command: &'static str,
    features: PathBuf,
    targets: PathBuf,
    val_features: Option<PathBuf>,
    val_targets: Option<PathBuf>,
    val_fraction: f64,
    batch_size: usize,
    momentum: f64,
    weight_decay: f64,
    lr: f64,
    lr_decay_factor: f64,
    patience: usize,
    max_epochs: usize,
    seed: u64,
    lambda_over: f64,
    lambda_under: f64,
    out_checkpoint: PathBuf,
    out_log: PathBuf,
}

/// Holds out the lexicographically last fraction of subjects.
fn split_by_subject(data: Dataset, fraction: f64) -> anyhow::Result<(Dataset, Dataset)> {
    let subjects: BTreeSet<&String> = data.subject_ids.iter().collect();
    if subjects.len() < 2 {
        return Err(usage("subject split needs at least two subjects"));
    }
    let n_val = ((subjects.len() as f64 * fraction).ceil() as usize)
        .clamp(1, subjects.len() - 1);
    let val_subjects: BTreeSet<String> = subjects
        .into_iter()
        .rev()
        .take(n_val)
        .cloned()
        .collect();

    let select = |val_side: bool| -> Dataset {
        let rows: Vec<usize> = (0..data.len())
            .filter(|&i| val_subjects.contains(&data.subject_ids[i]) == val_side)
            .collect();
        let mut features = nalgebra::DMatrix::zeros(rows.len(), data.feature_dim());
        let mut targets = Vec::with_capacity(rows.len());
        let mut subject_ids = Vec::with_capacity(rows.len());
        for (r, &i) in rows.iter().enumerate() {
            features.row_mut(r).copy_from(&data.features.row(i));
            targets.push(data.targets[i].clone());
            subject_ids.push(data.subject_ids[i].clone());
        }
        Dataset {
            features,
            targets,
            subject_ids,
        }
    };
    Ok((select(false), select(true)))
}

pub fn run(args: &TrainArgs) -> anyhow::Result<()> {
    let file: FileCfg = load_file(args.config.as_deref())?;
    let resolved = Resolved {
        command: "train",
        features: need(args.features.clone(), file.features, "features")?,
        targets: need(args.targets.clone(), file.targets, "targets")?,
        val_features: args.val_features.clone().or(file.val_features),
        val_targets: args.val_targets.clone().or(file.val_targets),
        val_fraction: pick(args.val_fraction, file.val_fraction, 0.2),
        batch_size: pick(args.batch_size, file.batch_size, 144),
        momentum: pick(args.momentum, file.momentum, 0.9),
        weight_decay: pick(args.weight_decay, file.weight_decay, 5e-4),
        lr: pick(args.lr, file.lr, 0.01),
        lr_decay_factor: pick(args.lr_decay_factor, file.lr_decay_factor, 0.1),
        patience: pick(args.patience, file.patience, 3),
        max_epochs: pick(args.max_epochs, file.max_epochs, 100),
        seed: pick(args.seed, file.seed, 0),
        lambda_over: pick(args.lambda_over, file.lambda_over, 1.0),
        lambda_under: pick(args.lambda_under, file.lambda_under, 3.0),
        out_checkpoint: need(args.out_checkpoint.clone(), file.out_checkpoint, "out-checkpoint")?,
        out_log: need(args.out_log.clone(), file.out_log, "out-log")?,
    };
    if resolved.val_features.is_some() != resolved.val_targets.is_some() {
        return Err(usage("--val-features and --val-targets must be given together"));
    }
    echo(&resolved)?;

    let full = read_dataset(open(&resolved.features)?, open(&resolved.targets)?)?;
    let (train_set, val_set) = match (&resolved.val_features, &resolved.val_targets) {
        (Some(vf), Some(vt)) => (full, read_dataset(open(vf)?, open(vt)?)?),
        _ => split_by_subject(full, resolved.val_fraction)?,
    };

    let cfg = TrainConfig {
        batch_size: resolved.batch_size,
        momentum: resolved.momentum,
        weight_decay: resolved.weight_decay,
        lr_head: resolved.lr,
        lr_decay_factor: resolved.lr_decay_factor,
        patience: resolved.patience,
        max_epochs: resolved.max_epochs,
        seed: resolved.seed,
        loss: LossConfig::new(resolved.lambda_over, resolved.lambda_under)?,
    };
    let (regressor, log) = train(&train_set, &val_set, &cfg)?;

    save_regressor(&resolved.out_checkpoint, &regressor)?;
    write_trainlog_csv(create(&resolved.out_log)?, &log)?;
    Ok(())
}
