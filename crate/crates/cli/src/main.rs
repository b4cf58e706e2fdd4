//! Command-line front end for the morphable-model parameter toolkit.
//!
//! Commands: `make-model`, `make-task`, `synth`, `pool`, `train`, `match`,
//! `eval`, `gradcheck`. Every command is deterministic given its inputs and
//! seed, echoes its fully resolved configuration to stderr as one JSON
//! line, and exits 0 on success, 2 on usage errors and 1 on runtime
//! failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "mm3d", version, about = "Parameter-space tools for linear 3D morphable face models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic morphable model file.
    MakeModel(MakeModelArgs),
    /// Generate a synthetic regression dataset (features + pooled targets).
    MakeTask(MakeTaskArgs),
    /// Synthesize a mesh from coefficients (or a prior draw) and write PLY.
    Synth(SynthArgs),
    /// Pool per-image estimates into per-subject coefficient vectors.
    Pool(PoolArgs),
    /// Train the affine regressor with mini-batch SGD.
    Train(TrainArgs),
    /// Score a verification pair protocol with the descriptor pipeline.
    Match(MatchArgs),
    /// Evaluate mesh accuracy or recognition scores.
    Eval(EvalArgs),
    /// Compare the analytic loss gradient against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
pub struct MakeModelArgs {
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Vertex count of the generated model.
    #[arg(long)]
    vertices: Option<usize>,
    #[arg(long)]
    shape_dim: Option<usize>,
    #[arg(long)]
    texture_dim: Option<usize>,
    /// Output model container path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct MakeTaskArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    images_per_subject: Option<usize>,
    #[arg(long)]
    feat_dim: Option<usize>,
    /// Standard deviation of the feature noise.
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Directory receiving train/val features and targets CSVs.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model container file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Coefficient CSV (id + columns); defaults to its first row.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Row id to pick from the coefficient CSV.
    #[arg(long)]
    row: Option<String>,
    /// Draw coefficients from the sigma-scaled Gaussian prior instead.
    #[arg(long)]
    random: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Treat input coefficients as sigma units rather than raw values.
    #[arg(long)]
    whitened: bool,
    /// Output PLY path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PoolArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Estimate list CSV (subject_id, item_id, kind, weight, coefficients).
    #[arg(long)]
    estimates: Option<PathBuf>,
    /// Two-stage template pooling (videos first, then items with equal
    /// weights) instead of flat confidence-weighted pooling.
    #[arg(long)]
    template: bool,
    /// Output CSV of pooled coefficients per subject.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long)]
    val_features: Option<PathBuf>,
    #[arg(long)]
    val_targets: Option<PathBuf>,
    /// Fraction of subjects held out when no validation files are given.
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lr_decay_factor: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda_over: Option<f64>,
    #[arg(long)]
    lambda_under: Option<f64>,
    /// Output checkpoint container path.
    #[arg(long)]
    out_checkpoint: Option<PathBuf>,
    /// Output per-epoch training log CSV.
    #[arg(long)]
    out_log: Option<PathBuf>,
}

#[derive(Args)]
pub struct MatchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pair protocol CSV (id_a, id_b, label).
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Pre-embedded descriptor CSV (id + columns); scored directly.
    #[arg(long)]
    descriptors: Option<PathBuf>,
    /// Raw coefficient CSV (id + columns); embedded via PCA + signed sqrt.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Training-split coefficient CSV the PCA is fitted on.
    #[arg(long)]
    pca_train: Option<PathBuf>,
    /// Retained PCA dimension; defaults to min(dim, N_train - 1).
    #[arg(long)]
    pca_dim: Option<usize>,
    /// Template definition CSV (template_id, item_id, kind); pair ids then
    /// refer to template ids and coefficients are pooled per template.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Output scores CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Estimate mesh (PLY) for geometric evaluation.
    #[arg(long)]
    estimate: Option<PathBuf>,
    /// Reference mesh (PLY).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Crop both meshes to this radius (mm) around their max-z vertex.
    #[arg(long)]
    crop_radius: Option<f64>,
    /// Crop center vertex index of the estimate mesh.
    #[arg(long)]
    nose_estimate: Option<u32>,
    /// Crop center vertex index of the reference mesh.
    #[arg(long)]
    nose_reference: Option<u32>,
    #[arg(long)]
    resolution: Option<usize>,
    /// Depth-map pixel size in millimeters.
    #[arg(long)]
    pixel_scale: Option<f64>,
    #[arg(long)]
    icp_max_iter: Option<usize>,
    #[arg(long)]
    icp_tol: Option<f64>,
    /// Report sqrt(sum)/N instead of the root-mean-square vertex error.
    #[arg(long)]
    literal_3drmse: bool,
    /// Write the rendered depth maps as <prefix>.estimate.p2f and
    /// <prefix>.reference.p2f (plus JSON sidecars).
    #[arg(long)]
    dump_depth: Option<PathBuf>,
    /// Labeled verification scores CSV (id_a, id_b, label, score).
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Long-form identification CSV
    /// (probe_id, probe_identity, gallery_id, gallery_identity, score).
    #[arg(long)]
    identification: Option<PathBuf>,
}

#[derive(Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Coefficient dimension of the sampled points.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    lambda_over: Option<f64>,
    #[arg(long)]
    lambda_under: Option<f64>,
    /// Number of sampled points.
    #[arg(long)]
    points: Option<usize>,
    /// Central-difference step.
    #[arg(long)]
    step: Option<f64>,
    /// Pass threshold on the max relative error.
    #[arg(long)]
    threshold: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MakeModel(args) => commands::make_model::run(&args),
        Command::MakeTask(args) => commands::make_task::run(&args),
        Command::Synth(args) => commands::synth::run(&args),
        Command::Pool(args) => commands::pool::run(&args),
        Command::Train(args) => commands::train::run(&args),
        Command::Match(args) => commands::matching::run(&args),
        Command::Eval(args) => commands::eval::run(&args),
        Command::Gradcheck(args) => commands::gradcheck::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<config::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
