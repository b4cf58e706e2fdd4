use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use mm3d_core::io::csvio::write_dataset;
use mm3d_core::regressor::make_synthetic_task;

use crate::config::{echo, load_file, need, pick};
use crate::MakeTaskArgs;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileCfg {
    seed: Option<u64>,
    subjects: Option<usize>,
    images_per_subject: Option<usize>,
    feat_dim: Option<usize>,
    noise_sigma: Option<f64>,
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    command: &'static str,
    seed: u64,
    subjects: usize,
    images_per_subject: usize,
    feat_dim: usize,
    noise_sigma: f64,
    out_dir: PathBuf,
}

pub fn run(args: &MakeTaskArgs) -> anyhow::Result<()> {
    let file: FileCfg = load_file(args.config.as_deref())?;
    let resolved = Resolved {
        command: "make-task",
        seed: pick(args.seed, file.seed, 0),
        subjects: pick(args.subjects, file.subjects, 500),
        images_per_subject: pick(args.images_per_subject, file.images_per_subject, 4),
        feat_dim: pick(args.feat_dim, file.feat_dim, 64),
        noise_sigma: pick(args.noise_sigma, file.noise_sigma, 0.1),
        out_dir: need(args.out_dir.clone(), file.out_dir, "out-dir")?,
    };
    echo(&resolved)?;

    let task = make_synthetic_task(
        resolved.seed,
        resolved.subjects,
        resolved.images_per_subject,
        resolved.feat_dim,
        resolved.noise_sigma,
    )?;

    std::fs::create_dir_all(&resolved.out_dir)?;
    for (split, dataset) in [("train", &task.train), ("val", &task.val)] {
        let features = BufWriter::new(File::create(
            resolved.out_dir.join(format!("{split}_features.csv")),
        )?);
        let targets = BufWriter::new(File::create(
            resolved.out_dir.join(format!("{split}_targets.csv")),
        )?);
        write_dataset(features, targets, dataset)?;
    }
    Ok(())
}
