use serde::{Deserialize, Serialize};

use mm3d_core::loss::{gradient_check, LossConfig};

use crate::config::{echo, load_file, pick};
use crate::GradcheckArgs;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileCfg {
    seed: Option<u64>,
    dim: Option<usize>,
    lambda_over: Option<f64>,
    lambda_under: Option<f64>,
    points: Option<usize>,
    step: Option<f64>,
    threshold: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    command: &'static str,
    seed: u64,
    dim: usize,
    lambda_over: f64,
    lambda_under: f64,
    points: usize,
    step: f64,
    threshold: f64,
}

pub fn run(args: &GradcheckArgs) -> anyhow::Result<()> {
    let file: FileCfg = load_file(args.config.as_deref())?;
    let resolved = Resolved {
        command: "gradcheck",
        seed: pick(args.seed, file.seed, 0),
        dim: pick(args.dim, file.dim, 198),
        lambda_over: pick(args.lambda_over, file.lambda_over, 1.0),
        lambda_under: pick(args.lambda_under, file.lambda_under, 3.0),
        points: pick(args.points, file.points, 1000),
        step: pick(args.step, file.step, 1e-5),
        threshold: pick(args.threshold, file.threshold, 1e-5),
    };
    echo(&resolved)?;

    let cfg = LossConfig::new(resolved.lambda_over, resolved.lambda_under)?;
    let report = gradient_check(resolved.seed, resolved.dim, &cfg, resolved.points, resolved.step)?;
    let pass = report.max_relative_error < resolved.threshold;
    println!("points,max_relative_error,threshold,result");
    println!(
        "{},{},{},{}",
        report.points_tested,
        report.max_relative_error,
        resolved.threshold,
        if pass { "pass" } else { "fail" }
    );
    if pass {
        Ok(())
    } else {
        anyhow::bail!(
            "gradient check failed: max relative error {} exceeds {}",
            report.max_relative_error,
            resolved.threshold
        );
    }
}
