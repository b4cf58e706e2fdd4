use std::path::PathBuf;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use mm3d_core::io::csvio::read_gamma_csv;
use mm3d_core::io::{load_model, save_ply};
use mm3d_core::model::{sample_params, synthesize, unwhiten, MorphableModel, ParamVector};

use crate::config::{echo, load_file, need, pick, usage};
use crate::SynthArgs;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileCfg {
    model: Option<PathBuf>,
    params: Option<PathBuf>,
    row: Option<String>,
    random: Option<bool>,
    seed: Option<u64>,
    whitened: Option<bool>,
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    command: &'static str,
    model: PathBuf,
    params: Option<PathBuf>,
    row: Option<String>,
    random: bool,
    seed: u64,
    whitened: bool,
    out: PathBuf,
}

fn coefficients_from_csv(
    model: &MorphableModel,
    path: &PathBuf,
    row: Option<&str>,
) -> anyhow::Result<ParamVector> {
    let rows = read_gamma_csv(mm3d_core::io::csvio::open(path)?)?;
    let (id, values) = match row {
        Some(wanted) => rows
            .into_iter()
            .find(|(id, _)| id == wanted)
            .ok_or_else(|| usage(format!("row {wanted:?} not found in {}", path.display())))?,
        None => rows
            .into_iter()
            .next()
            .ok_or_else(|| usage(format!("{} has no coefficient rows", path.display())))?,
    };
    let expected = model.shape_dim() + model.texture_dim();
    if values.len() != expected {
        anyhow::bail!(
            "row {id:?} in {} has {} coefficients, model expects {expected}",
            path.display(),
            values.len()
        );
    }
    Ok(ParamVector::from_concat(&values, model.shape_dim())?)
}

pub fn run(args: &SynthArgs) -> anyhow::Result<()> {
    let file: FileCfg = load_file(args.config.as_deref())?;
    let resolved = Resolved {
        command: "synth",
        model: need(args.model.clone(), file.model, "model")?,
        params: args.params.clone().or(file.params),
        row: args.row.clone().or(file.row),
        random: args.random || file.random.unwrap_or(false),
        seed: pick(args.seed, file.seed, 0),
        whitened: args.whitened || file.whitened.unwrap_or(false),
        out: need(args.out.clone(), file.out, "out")?,
    };
    if resolved.random == resolved.params.is_some() {
        return Err(usage("exactly one of --params and --random is required"));
    }
    if resolved.random && resolved.whitened {
        return Err(usage("--whitened applies to CSV coefficients, not prior draws"));
    }
    echo(&resolved)?;

    let model = load_model(&resolved.model)?;
    let mut gamma = match &resolved.params {
        Some(path) => coefficients_from_csv(&model, path, resolved.row.as_deref())?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(resolved.seed);
            sample_params(&model, &mut rng)
        }
    };
    if resolved.whitened {
        gamma = unwhiten(&model, &gamma)?;
    }

    let mesh = synthesize(&model, &gamma)?;
    save_ply(&resolved.out, &mesh)?;
    Ok(())
}
