//! Linear statistical shape and texture model: synthesis, projection,
//! whitening and synthetic model generation.
//!
//! A face is the mean plus a parameter-weighted sum of principal components,
//! independently for geometry and per-vertex color. Parameters are stored
//! raw (component units); whitening by the per-component standard deviations
//! is an explicit, optional transform.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Point3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Shape coefficient count of the default parameterization.
pub const DEFAULT_SHAPE_DIM: usize = 99;
/// Texture coefficient count of the default parameterization.
pub const DEFAULT_TEXTURE_DIM: usize = 99;

/// Name of the landmark every model must carry.
pub const NOSE_TIP: &str = "nose_tip";

/// Coefficient vector `[alpha, beta]` describing one face.
///
/// `alpha` weights the shape basis, `beta` the texture basis. Both are in
/// raw component units unless explicitly whitened.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
}

impl ParamVector {
    pub fn new(alpha: DVector<f64>, beta: DVector<f64>) -> Self {
        Self { alpha, beta }
    }

    pub fn zeros(k_shape: usize, k_texture: usize) -> Self {
        Self {
            alpha: DVector::zeros(k_shape),
            beta: DVector::zeros(k_texture),
        }
    }

    /// Splits a concatenated coefficient vector into `[alpha, beta]` halves
    /// at `k_shape`.
    pub fn from_concat(values: &[f64], k_shape: usize) -> Result<Self> {
        if values.len() < k_shape {
            return Err(Error::dims("param vector split", k_shape, values.len()));
        }
        Ok(Self {
            alpha: DVector::from_column_slice(&values[..k_shape]),
            beta: DVector::from_column_slice(&values[k_shape..]),
        })
    }

    /// Concatenated `[alpha, beta]` coefficients.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.len());
        v.rows_mut(0, self.alpha.len()).copy_from(&self.alpha);
        v.rows_mut(self.alpha.len(), self.beta.len())
            .copy_from(&self.beta);
        v
    }

    pub fn len(&self) -> usize {
        self.alpha.len() + self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.alpha.len(), self.beta.len())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        let finite =
            self.alpha.iter().all(|v| v.is_finite()) && self.beta.iter().all(|v| v.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite("param vector"))
        }
    }
}

/// Triangle mesh with optional per-vertex RGB colors (0..255).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    /// Vertex positions in millimeters.
    pub positions: Vec<Point3<f64>>,
    /// Per-vertex RGB, same length as `positions` when present.
    pub colors: Option<Vec<[f64; 3]>>,
    /// Vertex index triples.
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(colors) = &self.colors {
            if colors.len() != self.positions.len() {
                return Err(Error::dims(
                    "mesh colors",
                    self.positions.len(),
                    colors.len(),
                ));
            }
        }
        let v = self.positions.len() as u32;
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= v) {
                return Err(Error::InvalidInput(format!(
                    "triangle {t} references vertex out of range (V = {v})"
                )));
            }
        }
        Ok(())
    }

    /// Arithmetic mean of the vertex positions.
    pub fn centroid(&self) -> Point3<f64> {
        let mut c = Point3::origin();
        for p in &self.positions {
            c.coords += p.coords;
        }
        c.coords /= self.positions.len().max(1) as f64;
        c
    }
}

/// Linear shape and texture model over a shared vertex topology.
///
/// All vector quantities are laid out as concatenated per-vertex triples
/// (XYZ for shape, RGB for texture), so each basis matrix has `3 * V` rows.
/// Immutable after construction; operations taking `&MorphableModel` are
/// pure and safe to call from multiple threads.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphableModel {
    pub mean_shape: DVector<f64>,
    pub mean_texture: DVector<f64>,
    /// `3V x K_s`, columns are shape principal components (millimeters).
    pub shape_basis: DMatrix<f64>,
    /// `3V x K_t`, columns are texture principal components.
    pub texture_basis: DMatrix<f64>,
    pub shape_sigmas: DVector<f64>,
    pub texture_sigmas: DVector<f64>,
    pub triangles: Vec<[u32; 3]>,
    /// Named vertex indices; must include `nose_tip`.
    pub landmarks: BTreeMap<String, u32>,
}

impl MorphableModel {
    /// Number of vertices.
    pub fn vertex_count(&self) -> usize {
        self.mean_shape.len() / 3
    }

    pub fn shape_dim(&self) -> usize {
        self.shape_basis.ncols()
    }

    pub fn texture_dim(&self) -> usize {
        self.texture_basis.ncols()
    }

    pub fn nose_tip(&self) -> Result<u32> {
        self.landmarks
            .get(NOSE_TIP)
            .copied()
            .ok_or_else(|| Error::InvalidModel(format!("missing {NOSE_TIP:?} landmark")))
    }

    /// Checks the structural invariants shared by generated and imported
    /// models.
    pub fn validate(&self) -> Result<()> {
        let rows = self.mean_shape.len();
        if rows == 0 || rows % 3 != 0 {
            return Err(Error::InvalidModel(format!(
                "mean shape length {rows} is not a positive multiple of 3"
            )));
        }
        if self.mean_texture.len() != rows {
            return Err(Error::dims("mean texture", rows, self.mean_texture.len()));
        }
        if self.shape_basis.nrows() != rows {
            return Err(Error::dims(
                "shape basis rows",
                rows,
                self.shape_basis.nrows(),
            ));
        }
        if self.texture_basis.nrows() != rows {
            return Err(Error::dims(
                "texture basis rows",
                rows,
                self.texture_basis.nrows(),
            ));
        }
        if self.shape_sigmas.len() != self.shape_basis.ncols() {
            return Err(Error::dims(
                "shape sigmas",
                self.shape_basis.ncols(),
                self.shape_sigmas.len(),
            ));
        }
        if self.texture_sigmas.len() != self.texture_basis.ncols() {
            return Err(Error::dims(
                "texture sigmas",
                self.texture_basis.ncols(),
                self.texture_sigmas.len(),
            ));
        }
        if self.shape_sigmas.iter().any(|&s| !(s > 0.0) || !s.is_finite())
            || self.texture_sigmas.iter().any(|&s| !(s > 0.0) || !s.is_finite())
        {
            return Err(Error::InvalidModel(
                "sigmas must be strictly positive and finite".into(),
            ));
        }
        let v = (rows / 3) as u32;
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= v) {
                return Err(Error::InvalidModel(format!(
                    "triangle {t} references vertex out of range (V = {v})"
                )));
            }
        }
        for (name, &idx) in &self.landmarks {
            if idx >= v {
                return Err(Error::InvalidModel(format!(
                    "landmark {name:?} references vertex {idx} out of range (V = {v})"
                )));
            }
        }
        self.nose_tip()?;
        Ok(())
    }
}

fn reshape_points(flat: &DVector<f64>) -> Vec<Point3<f64>> {
    flat.as_slice()
        .chunks_exact(3)
        .map(|c| Point3::new(c[0], c[1], c[2]))
        .collect()
}

/// Generates the mesh described by `params`: mean plus basis-weighted
/// offsets for both geometry and color.
///
/// Colors are clamped to `[0, 255]` at the output; shape is unclamped.
pub fn synthesize(model: &MorphableModel, params: &ParamVector) -> Result<Mesh> {
    params.ensure_finite()?;
    if params.alpha.len() != model.shape_dim() {
        return Err(Error::dims(
            "shape coefficients",
            model.shape_dim(),
            params.alpha.len(),
        ));
    }
    if params.beta.len() != model.texture_dim() {
        return Err(Error::dims(
            "texture coefficients",
            model.texture_dim(),
            params.beta.len(),
        ));
    }

    let shape = &model.mean_shape + &model.shape_basis * &params.alpha;
    let texture = &model.mean_texture + &model.texture_basis * &params.beta;

    let colors = texture
        .as_slice()
        .chunks_exact(3)
        .map(|c| {
            [
                c[0].clamp(0.0, 255.0),
                c[1].clamp(0.0, 255.0),
                c[2].clamp(0.0, 255.0),
            ]
        })
        .collect();

    Ok(Mesh {
        positions: reshape_points(&shape),
        colors: Some(colors),
        triangles: model.triangles.clone(),
    })
}

/// Least-squares solver for recovering coefficients from meshes against a
/// fixed model.
///
/// Factors the normal equations once; use this over repeated [`project`]
/// calls when projecting many meshes against the same model.
pub struct Projector<'a> {
    model: &'a MorphableModel,
    shape_chol: Cholesky<f64, Dyn>,
    texture_chol: Cholesky<f64, Dyn>,
}

impl<'a> Projector<'a> {
    pub fn new(model: &'a MorphableModel) -> Result<Self> {
        let shape_gram = model.shape_basis.tr_mul(&model.shape_basis);
        let texture_gram = model.texture_basis.tr_mul(&model.texture_basis);
        let shape_chol = Cholesky::new(shape_gram)
            .ok_or_else(|| Error::InvalidModel("shape basis is rank deficient".into()))?;
        let texture_chol = Cholesky::new(texture_gram)
            .ok_or_else(|| Error::InvalidModel("texture basis is rank deficient".into()))?;
        Ok(Self {
            model,
            shape_chol,
            texture_chol,
        })
    }

    /// Least-squares coefficients for `mesh` under the model bases.
    ///
    /// `beta` is zero when the mesh carries no colors.
    pub fn project(&self, mesh: &Mesh) -> Result<ParamVector> {
        let model = self.model;
        if mesh.vertex_count() != model.vertex_count() {
            return Err(Error::dims(
                "mesh vertices",
                model.vertex_count(),
                mesh.vertex_count(),
            ));
        }

        let mut residual = DVector::zeros(model.mean_shape.len());
        for (i, p) in mesh.positions.iter().enumerate() {
            residual[3 * i] = p.x - model.mean_shape[3 * i];
            residual[3 * i + 1] = p.y - model.mean_shape[3 * i + 1];
            residual[3 * i + 2] = p.z - model.mean_shape[3 * i + 2];
        }
        let alpha = self.shape_chol.solve(&model.shape_basis.tr_mul(&residual));

        let beta = match &mesh.colors {
            Some(colors) => {
                let mut residual = DVector::zeros(model.mean_texture.len());
                for (i, c) in colors.iter().enumerate() {
                    residual[3 * i] = c[0] - model.mean_texture[3 * i];
                    residual[3 * i + 1] = c[1] - model.mean_texture[3 * i + 1];
                    residual[3 * i + 2] = c[2] - model.mean_texture[3 * i + 2];
                }
                self.texture_chol
                    .solve(&model.texture_basis.tr_mul(&residual))
            }
            None => DVector::zeros(model.texture_dim()),
        };

        Ok(ParamVector::new(alpha, beta))
    }
}

/// One-shot least-squares inverse of [`synthesize`].
pub fn project(model: &MorphableModel, mesh: &Mesh) -> Result<ParamVector> {
    Projector::new(model)?.project(mesh)
}

/// Converts raw coefficients to multiples of the per-component standard
/// deviation.
pub fn whiten(model: &MorphableModel, params: &ParamVector) -> Result<ParamVector> {
    check_param_dims(model, params)?;
    Ok(ParamVector::new(
        params.alpha.component_div(&model.shape_sigmas),
        params.beta.component_div(&model.texture_sigmas),
    ))
}

/// Inverse of [`whiten`]: sigma-unit coefficients back to raw units.
pub fn unwhiten(model: &MorphableModel, params: &ParamVector) -> Result<ParamVector> {
    check_param_dims(model, params)?;
    Ok(ParamVector::new(
        params.alpha.component_mul(&model.shape_sigmas),
        params.beta.component_mul(&model.texture_sigmas),
    ))
}

fn check_param_dims(model: &MorphableModel, params: &ParamVector) -> Result<()> {
    if params.alpha.len() != model.shape_dim() {
        return Err(Error::dims(
            "shape coefficients",
            model.shape_dim(),
            params.alpha.len(),
        ));
    }
    if params.beta.len() != model.texture_dim() {
        return Err(Error::dims(
            "texture coefficients",
            model.texture_dim(),
            params.beta.len(),
        ));
    }
    Ok(())
}

/// Draws raw coefficients from the zero-mean Gaussian prior with the
/// model's per-component standard deviations.
pub fn sample_params<R: Rng>(model: &MorphableModel, rng: &mut R) -> ParamVector {
    let alpha = DVector::from_iterator(
        model.shape_dim(),
        model
            .shape_sigmas
            .iter()
            .map(|&s| s * rng.sample::<f64, _>(StandardNormal)),
    );
    let beta = DVector::from_iterator(
        model.texture_dim(),
        model
            .texture_sigmas
            .iter()
            .map(|&s| s * rng.sample::<f64, _>(StandardNormal)),
    );
    ParamVector::new(alpha, beta)
}

/// Grid dimensions used by the synthetic generator: `columns` is
/// `floor(sqrt(V))`, rows cover the remaining vertices.
fn grid_dims(vertex_count: usize) -> (usize, usize) {
    let cols = (vertex_count as f64).sqrt().floor() as usize;
    let rows = vertex_count.div_ceil(cols);
    (rows, cols)
}

/// Builds a deterministic stand-in model for development and testing.
///
/// The mean face is a convex dome over a rectangular grid patch (two
/// triangles per full cell), z increasing toward the center and strictly
/// positive everywhere. Bases are seeded Gaussian draws orthonormalized
/// column by column; sigmas are positive and strictly decreasing. The
/// `nose_tip` landmark is the vertex with maximal mean z.
pub fn generate_synthetic_model(
    seed: u64,
    vertex_count: usize,
    k_shape: usize,
    k_texture: usize,
) -> Result<MorphableModel> {
    if vertex_count < 16 {
        return Err(Error::InvalidInput(format!(
            "vertex count {vertex_count} < 16"
        )));
    }
    let rows3 = 3 * vertex_count;
    if k_shape == 0 || k_texture == 0 || k_shape > rows3 || k_texture > rows3 {
        return Err(Error::InvalidInput(format!(
            "basis dims (K_s = {k_shape}, K_t = {k_texture}) must be in 1..=3V = {rows3}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (grid_rows, grid_cols) = grid_dims(vertex_count);

    // Dome geometry: x spans +-80 mm, y +-100 mm, z in roughly [40, 100] mm.
    const HALF_W: f64 = 80.0;
    const HALF_H: f64 = 100.0;
    const DOME_RX: f64 = 95.0;
    const DOME_RY: f64 = 115.0;
    const DOME_HEIGHT: f64 = 60.0;
    const DOME_BASE: f64 = 40.0;
    const JITTER: f64 = 0.25;

    let mut mean_shape = DVector::zeros(rows3);
    let mut mean_texture = DVector::zeros(rows3);
    for i in 0..vertex_count {
        let r = i / grid_cols;
        let c = i % grid_cols;
        let u = c as f64 / (grid_cols - 1) as f64;
        let v = r as f64 / (grid_rows - 1).max(1) as f64;
        let x = (u - 0.5) * 2.0 * HALF_W + rng.random_range(-JITTER..=JITTER);
        let y = (0.5 - v) * 2.0 * HALF_H + rng.random_range(-JITTER..=JITTER);
        let bulge = (1.0 - (x / DOME_RX).powi(2) - (y / DOME_RY).powi(2)).max(0.0);
        let z = DOME_BASE + DOME_HEIGHT * bulge.sqrt() + rng.random_range(-JITTER..=JITTER);
        mean_shape[3 * i] = x;
        mean_shape[3 * i + 1] = y;
        mean_shape[3 * i + 2] = z;
        // Smooth skin-like gradient, kept well inside [0, 255].
        mean_texture[3 * i] = 170.0 + 40.0 * u;
        mean_texture[3 * i + 1] = 130.0 + 30.0 * v;
        mean_texture[3 * i + 2] = 105.0 + 0.5 * (z - DOME_BASE);
    }

    let shape_basis = random_orthonormal_basis(&mut rng, rows3, k_shape)?;
    let texture_basis = random_orthonormal_basis(&mut rng, rows3, k_texture)?;

    let shape_sigmas = DVector::from_fn(k_shape, |k, _| 25.0 * 0.96f64.powi(k as i32));
    let texture_sigmas = DVector::from_fn(k_texture, |k, _| 35.0 * 0.95f64.powi(k as i32));

    let mut triangles = Vec::new();
    for r in 0..grid_rows.saturating_sub(1) {
        for c in 0..grid_cols - 1 {
            let i00 = r * grid_cols + c;
            let i01 = i00 + 1;
            let i10 = i00 + grid_cols;
            let i11 = i10 + 1;
            if i11 < vertex_count {
                triangles.push([i00 as u32, i10 as u32, i11 as u32]);
                triangles.push([i00 as u32, i11 as u32, i01 as u32]);
            }
        }
    }

    let nose_tip = (0..vertex_count)
        .max_by(|&a, &b| {
            mean_shape[3 * a + 2]
                .partial_cmp(&mean_shape[3 * b + 2])
                .expect("mean z is finite")
        })
        .expect("vertex count > 0");

    let mut landmarks = BTreeMap::new();
    landmarks.insert(NOSE_TIP.to_string(), nose_tip as u32);

    let model = MorphableModel {
        mean_shape,
        mean_texture,
        shape_basis,
        texture_basis,
        shape_sigmas,
        texture_sigmas,
        triangles,
        landmarks,
    };
    model.validate()?;
    Ok(model)
}

/// Gaussian draw orthonormalized with two modified Gram-Schmidt passes.
fn random_orthonormal_basis<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let mut basis = DMatrix::zeros(rows, cols);
    for k in 0..cols {
        for i in 0..rows {
            basis[(i, k)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    for _pass in 0..2 {
        for k in 0..cols {
            let mut col = basis.column(k).clone_owned();
            for j in 0..k {
                let prev = basis.column(j);
                let dot = prev.dot(&col);
                col.axpy(-dot, &prev.clone_owned(), 1.0);
            }
            let norm = col.norm();
            if norm < 1e-10 {
                return Err(Error::InvalidModel(
                    "basis draw is rank deficient".into(),
                ));
            }
            col /= norm;
            basis.set_column(k, &col);
        }
    }
    Ok(basis)
}
