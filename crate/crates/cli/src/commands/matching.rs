use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use mm3d_core::io::csvio::{
    create, open, read_gamma_csv, read_pairs_csv, read_templates_csv, split_gamma,
    write_scores_csv,
};
use mm3d_core::matching::{
    embed, fit_pca, pool_templates, score_pairs, Descriptor, PcaTransform,
};
use mm3d_core::pooling::WeightedEstimate;

use crate::config::{echo, load_file, need, usage};
use crate::MatchArgs;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileCfg {
    pairs: Option<PathBuf>,
    descriptors: Option<PathBuf>,
    params: Option<PathBuf>,
    pca_train: Option<PathBuf>,
    pca_dim: Option<usize>,
    templates: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    command: &'static str,
    pairs: PathBuf,
    descriptors: Option<PathBuf>,
    params: Option<PathBuf>,
    pca_train: Option<PathBuf>,
    pca_dim: Option<usize>,
    templates: Option<PathBuf>,
    out: PathBuf,
}

fn fit_pca_from(path: &PathBuf, dim: Option<usize>) -> anyhow::Result<PcaTransform> {
    let rows = read_gamma_csv(open(path)?)?;
    let training = rows
        .iter()
        .map(|(_, values)| split_gamma(values))
        .collect::<Result<Vec<_>, _>>()?;
    let pca = match dim {
        Some(m) => fit_pca(&training, m)?,
        None => mm3d_core::matching::fit_pca_default(&training)?,
    };
    Ok(pca)
}

fn descriptors_from_params(resolved: &Resolved) -> anyhow::Result<BTreeMap<String, Descriptor>> {
    let params_path = resolved.params.as_ref().expect("checked by caller");
    let pca_path = resolved
        .pca_train
        .as_ref()
        .ok_or_else(|| usage("--params requires --pca-train (the PCA training split)"))?;
    let pca = fit_pca_from(pca_path, resolved.pca_dim)?;

    let rows = read_gamma_csv(open(params_path)?)?;
    let gammas: BTreeMap<String, mm3d_core::model::ParamVector> = match &resolved.templates {
        Some(template_path) => {
            let defs = read_templates_csv(open(template_path)?)?;
            let mut estimates_by_item: BTreeMap<String, Vec<WeightedEstimate>> = BTreeMap::new();
            for (id, values) in &rows {
                estimates_by_item
                    .entry(id.clone())
                    .or_default()
                    .push(WeightedEstimate::equal(split_gamma(values)?));
            }
            pool_templates(&defs, &estimates_by_item)?
        }
        None => {
            let mut map = BTreeMap::new();
            for (id, values) in &rows {
                if map.insert(id.clone(), split_gamma(values)?).is_some() {
                    return Err(usage(format!(
                        "duplicate id {id:?} in {} (use --templates for multi-frame items)",
                        params_path.display()
                    )));
                }
            }
            map
        }
    };

    let mut descriptors = BTreeMap::new();
    for (id, gamma) in gammas {
        descriptors.insert(id, embed(&gamma, &pca)?);
    }
    Ok(descriptors)
}

pub fn run(args: &MatchArgs) -> anyhow::Result<()> {
    let file: FileCfg = load_file(args.config.as_deref())?;
    let resolved = Resolved {
        command: "match",
        pairs: need(args.pairs.clone(), file.pairs, "pairs")?,
        descriptors: args.descriptors.clone().or(file.descriptors),
        params: args.params.clone().or(file.params),
        pca_train: args.pca_train.clone().or(file.pca_train),
        pca_dim: args.pca_dim.or(file.pca_dim),
        templates: args.templates.clone().or(file.templates),
        out: need(args.out.clone(), file.out, "out")?,
    };
    if resolved.descriptors.is_some() == resolved.params.is_some() {
        return Err(usage("exactly one of --descriptors and --params is required"));
    }
    if resolved.descriptors.is_some() && resolved.templates.is_some() {
        return Err(usage(
            "--templates pools raw coefficients; it cannot be combined with --descriptors",
        ));
    }
    echo(&resolved)?;

    let descriptors = match &resolved.descriptors {
        Some(path) => {
            let mut map = BTreeMap::new();
            for (id, values) in read_gamma_csv(open(path)?)? {
                map.insert(
                    id,
                    Descriptor {
                        values: DVector::from_vec(values),
                    },
                );
            }
            map
        }
        None => descriptors_from_params(&resolved)?,
    };

    let pairs = read_pairs_csv(open(&resolved.pairs)?)?;
    let scores = score_pairs(&pairs, &descriptors)?;
    write_scores_csv(create(&resolved.out)?, &scores)?;
    Ok(())
}
