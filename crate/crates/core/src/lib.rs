//! Parameter-space toolkit for linear 3D morphable face models.
//!
//! A face is a point in a statistical shape/texture space: the mean face
//! plus a coefficient-weighted sum of principal components. This crate
//! implements the machinery that operates on those coefficient vectors:
//!
//! - [`model`]: linear synthesis and least-squares projection, plus a
//!   deterministic synthetic model generator and a documented binary
//!   container for imported model data;
//! - [`pooling`]: confidence-weighted aggregation of per-image estimates
//!   into subject- and template-level estimates;
//! - [`loss`]: the asymmetric Euclidean loss that penalizes shrinkage
//!   toward the mean face more than overshoot, with its analytic gradient
//!   and a finite-difference checker;
//! - [`regressor`]: a mini-batch SGD trainer (momentum, decoupled weight
//!   decay, plateau learning-rate decay) for an affine regression head, and
//!   a synthetic task generator;
//! - [`matching`]: the descriptor pipeline (benchmark PCA, signed square
//!   root, cosine similarity) and protocol scoring;
//! - [`metrics`]: rigid ICP alignment, nose-radius cropping, orthographic
//!   depth rendering, the 3DRMSE/RMSE/log10/Rel accuracy measures and the
//!   verification/identification metrics (accuracy, EER, AUC, TAR, CMC);
//! - [`io`]: the file formats behind the CLI (binary containers, ASCII
//!   PLY, depth grids, CSV tables).
//!
//! All operations are pure and deterministic given their inputs and seeds;
//! shared data structures are immutable after construction and safe to read
//! concurrently.

pub mod error;
pub mod io;
pub mod loss;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod pooling;
pub mod regressor;

pub use error::{Error, Result};
pub use loss::{asymmetric_loss, asymmetric_loss_grad, LossConfig};
pub use matching::{embed, fit_pca, score_pairs, similarity, Descriptor, PcaTransform, ScoreSet};
pub use metrics::{
    cmc, crop_radius, evaluate_meshes, icp_align, render_depth, shape_errors,
    verification_metrics, DepthMap, MeshEvalOptions, RigidTransform, ShapeErrorReport,
};
pub use model::{
    generate_synthetic_model, project, synthesize, Mesh, MorphableModel, ParamVector,
};
pub use pooling::{pool, pool_template, TemplateItem, WeightedEstimate};
pub use regressor::{
    make_synthetic_task, predict, train, Dataset, LinearRegressor, TrainConfig, TrainLog,
};
