use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use mm3d_core::io::csvio::{open, read_identification_csv, read_scores_csv};
use mm3d_core::io::{load_ply, save_depth_map};
use mm3d_core::metrics::{cmc, evaluate_meshes_detailed, verification_metrics, MeshEvalOptions};

use crate::config::{echo, load_file, pick, usage};
use crate::EvalArgs;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileCfg {
    estimate: Option<PathBuf>,
    reference: Option<PathBuf>,
    crop_radius: Option<f64>,
    nose_estimate: Option<u32>,
    nose_reference: Option<u32>,
    resolution: Option<usize>,
    pixel_scale: Option<f64>,
    icp_max_iter: Option<usize>,
    icp_tol: Option<f64>,
    literal_3drmse: Option<bool>,
    dump_depth: Option<PathBuf>,
    scores: Option<PathBuf>,
    identification: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    command: &'static str,
    estimate: Option<PathBuf>,
    reference: Option<PathBuf>,
    crop_radius: Option<f64>,
    nose_estimate: Option<u32>,
    nose_reference: Option<u32>,
    resolution: usize,
    pixel_scale: f64,
    icp_max_iter: usize,
    icp_tol: f64,
    literal_3drmse: bool,
    dump_depth: Option<PathBuf>,
    scores: Option<PathBuf>,
    identification: Option<PathBuf>,
}

fn run_mesh_eval(resolved: &Resolved) -> anyhow::Result<()> {
    let estimate = load_ply(resolved.estimate.as_ref().expect("checked by caller"))?;
    let reference = load_ply(resolved.reference.as_ref().expect("checked by caller"))?;
    let opts = MeshEvalOptions {
        crop_radius_mm: resolved.crop_radius,
        crop_center_estimate: resolved.nose_estimate,
        crop_center_reference: resolved.nose_reference,
        icp_max_iter: resolved.icp_max_iter,
        icp_tol: resolved.icp_tol,
        resolution: resolved.resolution,
        pixel_scale: resolved.pixel_scale,
        literal_3drmse: resolved.literal_3drmse,
    };
    let outcome = evaluate_meshes_detailed(&estimate, &reference, &opts)?;
    if let Some(prefix) = &resolved.dump_depth {
        let base = prefix.to_string_lossy();
        save_depth_map(&PathBuf::from(format!("{base}.estimate.p2f")), &outcome.depth)?;
        save_depth_map(
            &PathBuf::from(format!("{base}.reference.p2f")),
            &outcome.reference_depth,
        )?;
    }
    let r = outcome.report;
    println!("rmse3d,rmse,log10,rel");
    println!("{},{},{},{}", r.rmse3d, r.rmse, r.log10, r.rel);
    Ok(())
}

fn run_scores_eval(path: &PathBuf) -> anyhow::Result<()> {
    let scores = read_scores_csv(open(path)?)?;
    let report = verification_metrics(&scores)?;
    println!("accuracy,eer,auc,tar_at_far10,tar_at_far1");
    println!(
        "{},{},{},{},{}",
        report.accuracy, report.eer, report.auc, report.tar_at_far10, report.tar_at_far1
    );
    Ok(())
}

fn run_identification_eval(path: &PathBuf) -> anyhow::Result<()> {
    let id_scores = read_identification_csv(open(path)?)?;
    let rates = cmc(&id_scores)?;
    println!("rank,rate");
    for (k, rate) in rates.iter().enumerate() {
        println!("{},{}", k + 1, rate);
    }
    Ok(())
}

pub fn run(args: &EvalArgs) -> anyhow::Result<()> {
    let file: FileCfg = load_file(args.config.as_deref())?;
    let resolved = Resolved {
        command: "eval",
        estimate: args.estimate.clone().or(file.estimate),
        reference: args.reference.clone().or(file.reference),
        crop_radius: args.crop_radius.or(file.crop_radius),
        nose_estimate: args.nose_estimate.or(file.nose_estimate),
        nose_reference: args.nose_reference.or(file.nose_reference),
        resolution: pick(args.resolution, file.resolution, 128),
        pixel_scale: pick(args.pixel_scale, file.pixel_scale, 1.6),
        icp_max_iter: pick(args.icp_max_iter, file.icp_max_iter, 60),
        icp_tol: pick(args.icp_tol, file.icp_tol, 1e-9),
        literal_3drmse: args.literal_3drmse || file.literal_3drmse.unwrap_or(false),
        dump_depth: args.dump_depth.clone().or(file.dump_depth),
        scores: args.scores.clone().or(file.scores),
        identification: args.identification.clone().or(file.identification),
    };

    let mesh_mode = resolved.estimate.is_some() || resolved.reference.is_some();
    let modes =
        usize::from(mesh_mode) + usize::from(resolved.scores.is_some()) + usize::from(resolved.identification.is_some());
    if modes != 1 {
        return Err(usage(
            "exactly one of (--estimate with --reference), --scores, --identification is required",
        ));
    }
    if mesh_mode && (resolved.estimate.is_none() || resolved.reference.is_none()) {
        return Err(usage("mesh evaluation needs both --estimate and --reference"));
    }
    echo(&resolved)?;

    if mesh_mode {
        run_mesh_eval(&resolved)
    } else if let Some(path) = &resolved.scores {
        run_scores_eval(path)
    } else {
        run_identification_eval(resolved.identification.as_ref().expect("mode checked"))
    }
}
