//! Geometric accuracy measures (ICP alignment, nose-radius cropping,
//! frontal depth projection, 3DRMSE/RMSE/log10/Rel) and recognition
//! metrics (accuracy, EER, AUC, TAR at FAR, CMC).

mod depth;
mod icp;
mod recognition;

pub use depth::{render_depth, render_depth_on, DepthGrid, DepthMap};
pub use icp::{fit_rigid, icp_align, IcpResult, KdTree3, RigidTransform};
pub use recognition::{cmc, verification_metrics, IdentificationScores, VerificationReport};

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::model::Mesh;

/// Keeps vertices within `radius_mm` of the vertex at `center_index`;
/// triangles touching a dropped vertex are removed and indices remapped.
///
/// Cropping a triangulated mesh down to zero triangles is an error (the
/// result cannot feed depth rendering); a mesh that had no triangles to
/// begin with may be cropped freely.
pub fn crop_radius(mesh: &Mesh, center_index: u32, radius_mm: f64) -> Result<Mesh> {
    if center_index as usize >= mesh.positions.len() {
        return Err(Error::InvalidInput(format!(
            "crop center {center_index} out of range (V = {})",
            mesh.positions.len()
        )));
    }
    if !(radius_mm > 0.0) || !radius_mm.is_finite() {
        return Err(Error::InvalidInput(format!("invalid crop radius {radius_mm}")));
    }
    mesh.validate()?;

    let center = mesh.positions[center_index as usize];
    let radius_sq = radius_mm * radius_mm;
    let mut remap = vec![u32::MAX; mesh.positions.len()];
    let mut positions = Vec::new();
    let mut colors = mesh.colors.as_ref().map(|_| Vec::new());
    for (i, p) in mesh.positions.iter().enumerate() {
        if (p - center).norm_squared() <= radius_sq {
            remap[i] = positions.len() as u32;
            positions.push(*p);
            if let (Some(out), Some(src)) = (&mut colors, &mesh.colors) {
                out.push(src[i]);
            }
        }
    }

    let triangles: Vec<[u32; 3]> = mesh
        .triangles
        .iter()
        .filter(|t| t.iter().all(|&i| remap[i as usize] != u32::MAX))
        .map(|t| t.map(|i| remap[i as usize]))
        .collect();

    if positions.is_empty() || (!mesh.triangles.is_empty() && triangles.is_empty()) {
        return Err(Error::DegenerateGeometry(format!(
            "crop radius {radius_mm} mm leaves no usable geometry"
        )));
    }

    Ok(Mesh {
        positions,
        colors,
        triangles,
    })
}

/// The four shape-accuracy measures. `rmse3d` is over corresponded
/// vertices; the rest are over jointly valid depth-map pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeErrorReport {
    /// Root of the mean squared per-vertex distance, millimeters.
    pub rmse3d: f64,
    /// Root of the mean squared per-pixel depth difference, millimeters.
    pub rmse: f64,
    /// Mean absolute difference of log10 depths.
    pub log10: f64,
    /// Mean absolute depth difference relative to the reference depth.
    pub rel: f64,
}

/// Root-mean-square per-vertex distance between corresponded meshes.
pub fn rmse3d(mesh: &Mesh, reference: &Mesh) -> Result<f64> {
    if mesh.positions.len() != reference.positions.len() {
        return Err(Error::dims(
            "corresponded vertices",
            reference.positions.len(),
            mesh.positions.len(),
        ));
    }
    if mesh.positions.is_empty() {
        return Err(Error::EmptyInput("corresponded vertices"));
    }
    let sum_sq: f64 = mesh
        .positions
        .iter()
        .zip(&reference.positions)
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    Ok((sum_sq / mesh.positions.len() as f64).sqrt())
}

/// Literal `sqrt(sum of squared distances) / N` variant, kept for
/// comparison with the conventional root-mean-square reading.
pub fn rmse3d_literal(mesh: &Mesh, reference: &Mesh) -> Result<f64> {
    if mesh.positions.len() != reference.positions.len() {
        return Err(Error::dims(
            "corresponded vertices",
            reference.positions.len(),
            mesh.positions.len(),
        ));
    }
    if mesh.positions.is_empty() {
        return Err(Error::EmptyInput("corresponded vertices"));
    }
    let sum_sq: f64 = mesh
        .positions
        .iter()
        .zip(&reference.positions)
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    Ok(sum_sq.sqrt() / mesh.positions.len() as f64)
}

/// All four measures over pre-corresponded meshes and co-registered depth
/// maps.
///
/// Depth terms use pixels valid in both maps; log10 and Rel require those
/// depths to be strictly positive.
pub fn shape_errors(
    mesh: &Mesh,
    reference: &Mesh,
    depth: &DepthMap,
    reference_depth: &DepthMap,
) -> Result<ShapeErrorReport> {
    let rmse3d = rmse3d(mesh, reference)?;

    if depth.grid.resolution != reference_depth.grid.resolution {
        return Err(Error::dims(
            "depth map resolution",
            reference_depth.grid.resolution,
            depth.grid.resolution,
        ));
    }

    let mut joint = 0usize;
    let mut sq_sum = 0.0;
    let mut log_sum = 0.0;
    let mut rel_sum = 0.0;
    for (d, r) in depth.depth.iter().zip(&reference_depth.depth) {
        if !d.is_finite() || !r.is_finite() {
            continue;
        }
        joint += 1;
        let diff = d - r;
        sq_sum += diff * diff;
        if *d <= 0.0 || *r <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "non-positive depth ({d}, {r}) in log10/Rel terms"
            )));
        }
        log_sum += (d.log10() - r.log10()).abs();
        rel_sum += diff.abs() / r.abs();
    }
    if joint == 0 {
        return Err(Error::InvalidInput(
            "depth maps share no jointly valid pixels".into(),
        ));
    }

    let n = joint as f64;
    Ok(ShapeErrorReport {
        rmse3d,
        rmse: (sq_sum / n).sqrt(),
        log10: log_sum / n,
        rel: rel_sum / n,
    })
}

/// For each vertex of `mesh`, its nearest point in `reference`
/// (estimate-to-ground-truth correspondence direction).
pub fn nearest_correspondence(mesh: &Mesh, reference: &Mesh) -> Result<Mesh> {
    let tree = KdTree3::build(&reference.positions)?;
    let positions: Vec<Point3<f64>> = mesh
        .positions
        .iter()
        .map(|p| reference.positions[tree.nearest(p).0])
        .collect();
    Ok(Mesh {
        positions,
        colors: None,
        triangles: Vec::new(),
    })
}

/// Options for the full mesh-to-mesh evaluation pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshEvalOptions {
    /// Crop both meshes to this radius around their crop centers before
    /// alignment; `None` skips cropping.
    pub crop_radius_mm: Option<f64>,
    /// Crop center vertex of the estimate; defaults to its max-z vertex.
    pub crop_center_estimate: Option<u32>,
    /// Crop center vertex of the reference; defaults to its max-z vertex.
    pub crop_center_reference: Option<u32>,
    pub icp_max_iter: usize,
    pub icp_tol: f64,
    pub resolution: usize,
    pub pixel_scale: f64,
    /// Report the literal `sqrt(sum) / N` form instead of the
    /// root-mean-square in the `rmse3d` field.
    pub literal_3drmse: bool,
}

impl Default for MeshEvalOptions {
    fn default() -> Self {
        Self {
            crop_radius_mm: None,
            crop_center_estimate: None,
            crop_center_reference: None,
            icp_max_iter: 60,
            icp_tol: 1e-9,
            resolution: 128,
            pixel_scale: 1.6,
            literal_3drmse: false,
        }
    }
}

fn max_z_vertex(mesh: &Mesh) -> u32 {
    let mut best = 0usize;
    for (i, p) in mesh.positions.iter().enumerate() {
        if p.z > mesh.positions[best].z {
            best = i;
        }
    }
    best as u32
}

/// Everything the evaluation pipeline produced, for callers that want the
/// intermediate geometry alongside the error figures.
pub struct MeshEvalOutcome {
    pub report: ShapeErrorReport,
    /// The estimate after cropping and ICP alignment.
    pub aligned: Mesh,
    pub depth: DepthMap,
    pub reference_depth: DepthMap,
}

/// Full accuracy pipeline: optional crop around the nose, rigid ICP
/// alignment of the estimate onto the reference, nearest-point
/// correspondence for the vertex measure and a shared-grid frontal depth
/// rendering for the pixel measures.
pub fn evaluate_meshes_detailed(
    estimate: &Mesh,
    reference: &Mesh,
    opts: &MeshEvalOptions,
) -> Result<MeshEvalOutcome> {
    let (estimate, reference) = match opts.crop_radius_mm {
        Some(radius) => {
            let ce = opts.crop_center_estimate.unwrap_or_else(|| max_z_vertex(estimate));
            let cr = opts
                .crop_center_reference
                .unwrap_or_else(|| max_z_vertex(reference));
            (
                crop_radius(estimate, ce, radius)?,
                crop_radius(reference, cr, radius)?,
            )
        }
        None => (estimate.clone(), reference.clone()),
    };

    let aligned = icp_align(&estimate, &reference, opts.icp_max_iter, opts.icp_tol)?.aligned;
    let matched = nearest_correspondence(&aligned, &reference)?;

    let grid = DepthGrid::centered_on(&reference, opts.resolution, opts.pixel_scale);
    let depth = render_depth_on(&aligned, &grid)?;
    let reference_depth = render_depth_on(&reference, &grid)?;

    let mut report = shape_errors(&aligned, &matched, &depth, &reference_depth)?;
    if opts.literal_3drmse {
        report.rmse3d = rmse3d_literal(&aligned, &matched)?;
    }
    Ok(MeshEvalOutcome {
        report,
        aligned,
        depth,
        reference_depth,
    })
}

/// [`evaluate_meshes_detailed`] reduced to the error figures.
pub fn evaluate_meshes(
    estimate: &Mesh,
    reference: &Mesh,
    opts: &MeshEvalOptions,
) -> Result<ShapeErrorReport> {
    Ok(evaluate_meshes_detailed(estimate, reference, opts)?.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn unit_grid(n: usize) -> Mesh {
        let mut positions = Vec::new();
        for r in 0..n {
            for c in 0..n {
                positions.push(Point3::new(c as f64, r as f64, 50.0));
            }
        }
        let mut triangles = Vec::new();
        for r in 0..n - 1 {
            for c in 0..n - 1 {
                let i = (r * n + c) as u32;
                triangles.push([i, i + n as u32, i + n as u32 + 1]);
                triangles.push([i, i + n as u32 + 1, i + 1]);
            }
        }
        Mesh {
            positions,
            colors: None,
            triangles,
        }
    }

    #[test]
    fn crop_with_huge_radius_is_identity() {
        let mesh = unit_grid(4);
        let cropped = crop_radius(&mesh, 0, 1e6).unwrap();
        assert_eq!(cropped.positions, mesh.positions);
        assert_eq!(cropped.triangles, mesh.triangles);
    }

    #[test]
    fn crop_matches_brute_force_filter() {
        let mesh = unit_grid(5);
        let center = 0u32;
        let radius = 1.5;
        let cropped = crop_radius(&mesh, center, radius).unwrap();
        let center_p = mesh.positions[center as usize];
        let expected: Vec<Point3<f64>> = mesh
            .positions
            .iter()
            .filter(|p| (*p - center_p).norm() <= radius)
            .cloned()
            .collect();
        assert_eq!(cropped.positions, expected);
        cropped.validate().unwrap();
    }

    #[test]
    fn crop_to_single_vertex_errors_when_triangulated() {
        let mesh = unit_grid(4);
        // Radius too small for any triangle to survive.
        assert!(matches!(
            crop_radius(&mesh, 0, 1e-6),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn crop_point_cloud_without_triangles_is_fine() {
        let mesh = Mesh {
            positions: unit_grid(4).positions,
            colors: None,
            triangles: vec![],
        };
        let cropped = crop_radius(&mesh, 0, 1e-6).unwrap();
        assert_eq!(cropped.positions.len(), 1);
    }

    #[test]
    fn crop_rejects_bad_center_and_radius() {
        let mesh = unit_grid(4);
        assert!(crop_radius(&mesh, 999, 1.0).is_err());
        assert!(crop_radius(&mesh, 0, 0.0).is_err());
        assert!(crop_radius(&mesh, 0, f64::NAN).is_err());
    }

    #[test]
    fn identical_inputs_give_all_zero_errors() {
        let mesh = unit_grid(6);
        let map = render_depth(&mesh, 16, 0.5).unwrap();
        let report = shape_errors(&mesh, &mesh, &map, &map).unwrap();
        assert_eq!(report.rmse3d, 0.0);
        assert_eq!(report.rmse, 0.0);
        assert_eq!(report.log10, 0.0);
        assert_eq!(report.rel, 0.0);
    }

    #[test]
    fn constant_offset_closed_forms() {
        let grid = DepthGrid {
            resolution: 8,
            pixel_scale: 1.0,
            origin: (0.0, 0.0),
        };
        let reference = DepthMap {
            grid,
            depth: vec![100.0; 64],
        };
        let offset = DepthMap {
            grid,
            depth: vec![101.0; 64],
        };
        let mesh = unit_grid(3);
        let report = shape_errors(&mesh, &mesh, &offset, &reference).unwrap();
        assert!((report.rmse - 1.0).abs() < 1e-9);
        assert!((report.rel - 0.01).abs() < 1e-9);
        assert!((report.log10 - (101f64.log10() - 100f64.log10())).abs() < 1e-12);
    }

    #[test]
    fn non_positive_depth_is_rejected() {
        let grid = DepthGrid {
            resolution: 2,
            pixel_scale: 1.0,
            origin: (0.0, 0.0),
        };
        let good = DepthMap {
            grid,
            depth: vec![1.0; 4],
        };
        let bad = DepthMap {
            grid,
            depth: vec![1.0, -2.0, 1.0, 1.0],
        };
        let mesh = unit_grid(3);
        assert!(shape_errors(&mesh, &mesh, &bad, &good).is_err());
    }

    #[test]
    fn disjoint_coverage_is_rejected() {
        let grid = DepthGrid {
            resolution: 2,
            pixel_scale: 1.0,
            origin: (0.0, 0.0),
        };
        let a = DepthMap {
            grid,
            depth: vec![1.0, f64::NAN, 1.0, f64::NAN],
        };
        let b = DepthMap {
            grid,
            depth: vec![f64::NAN, 1.0, f64::NAN, 1.0],
        };
        let mesh = unit_grid(3);
        assert!(shape_errors(&mesh, &mesh, &a, &b).is_err());
    }

    #[test]
    fn rmse3d_is_symmetric_under_fixed_correspondence() {
        let a = unit_grid(4);
        let mut b = a.clone();
        for p in b.positions.iter_mut() {
            p.z += 2.0;
        }
        assert_eq!(rmse3d(&a, &b).unwrap(), rmse3d(&b, &a).unwrap());
        assert!((rmse3d(&a, &b).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_identical_meshes_is_a_zero_row() {
        let mesh = unit_grid(8);
        let opts = MeshEvalOptions {
            resolution: 16,
            pixel_scale: 0.6,
            ..MeshEvalOptions::default()
        };
        let report = evaluate_meshes(&mesh, &mesh, &opts).unwrap();
        assert_eq!(report.rmse3d, 0.0);
        assert_eq!(report.rmse, 0.0);
        assert_eq!(report.log10, 0.0);
        assert_eq!(report.rel, 0.0);
    }
}
