use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use mm3d_core::io::save_model;
use mm3d_core::model::generate_synthetic_model;

use crate::config::{echo, load_file, need, pick};
use crate::MakeModelArgs;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileCfg {
    seed: Option<u64>,
    vertices: Option<usize>,
    shape_dim: Option<usize>,
    texture_dim: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    command: &'static str,
    seed: u64,
    vertices: usize,
    shape_dim: usize,
    texture_dim: usize,
    out: PathBuf,
}

pub fn run(args: &MakeModelArgs) -> anyhow::Result<()> {
    let file: FileCfg = load_file(args.config.as_deref())?;
    let resolved = Resolved {
        command: "make-model",
        seed: pick(args.seed, file.seed, 0),
        vertices: pick(args.vertices, file.vertices, 400),
        shape_dim: pick(args.shape_dim, file.shape_dim, 99),
        texture_dim: pick(args.texture_dim, file.texture_dim, 99),
        out: need(args.out.clone(), file.out, "out")?,
    };
    echo(&resolved)?;

    let model = generate_synthetic_model(
        resolved.seed,
        resolved.vertices,
        resolved.shape_dim,
        resolved.texture_dim,
    )?;
    save_model(&resolved.out, &model)?;
    Ok(())
}
