//! Rigid point-cloud registration: k-d tree nearest neighbors, closed-form
//! SVD rigid fit and iterative closest point alignment.

use nalgebra::{Matrix3, Point3, Vector3, SVD};

use crate::error::{Error, Result};
use crate::model::Mesh;

/// Proper rigid motion `p -> R p + t` in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// `outer` applied after `self`: `(outer * self)(p) = outer(self(p))`.
    pub fn then(&self, outer: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: outer.rotation * self.rotation,
            translation: outer.rotation * self.translation + outer.translation,
        }
    }

    /// Checks `R^T R = I` (to 1e-8) and `det(R) > 0`.
    pub fn validate(&self) -> Result<()> {
        let gram = self.rotation.transpose() * self.rotation;
        let max_dev = (gram - Matrix3::identity()).abs().max();
        if max_dev > 1e-8 {
            return Err(Error::DegenerateGeometry(format!(
                "rotation is not orthonormal (max deviation {max_dev:.3e})"
            )));
        }
        if self.rotation.determinant() <= 0.0 {
            return Err(Error::DegenerateGeometry("rotation is a reflection".into()));
        }
        Ok(())
    }

    /// Rotation angle in radians, for comparing against a reference. Uses
    /// the skew part of the relative rotation, which stays accurate for
    /// near-zero angles where the trace formula loses precision.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation * other.rotation.transpose();
        let sin_vec = Vector3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        ) / 2.0;
        let cos = (rel.trace() - 1.0) / 2.0;
        sin_vec.norm().atan2(cos)
    }
}

/// Static 3D k-d tree over a point set, for nearest-neighbor queries.
///
/// Ties in distance resolve to the smallest point index, so queries are
/// deterministic regardless of tree layout.
pub struct KdTree3 {
    nodes: Vec<KdNode>,
    points: Vec<Point3<f64>>,
    root: i32,
}

struct KdNode {
    point: u32,
    axis: u8,
    left: i32,
    right: i32,
}

impl KdTree3 {
    pub fn build(points: &[Point3<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("k-d tree points"));
        }
        let mut tree = Self {
            nodes: Vec::with_capacity(points.len()),
            points: points.to_vec(),
            root: -1,
        };
        let mut indices: Vec<u32> = (0..points.len() as u32).collect();
        tree.root = tree.build_node(&mut indices, 0);
        Ok(tree)
    }

    fn build_node(&mut self, indices: &mut [u32], depth: usize) -> i32 {
        if indices.is_empty() {
            return -1;
        }
        let axis = (depth % 3) as u8;
        let mid = indices.len() / 2;
        indices.select_nth_unstable_by(mid, |&a, &b| {
            let ca = self.points[a as usize][axis as usize];
            let cb = self.points[b as usize][axis as usize];
            ca.partial_cmp(&cb).expect("finite coordinates").then(a.cmp(&b))
        });
        let point = indices[mid];
        let node_index = self.nodes.len() as i32;
        self.nodes.push(KdNode {
            point,
            axis,
            left: -1,
            right: -1,
        });
        let (lo, rest) = indices.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = self.build_node(lo, depth + 1);
        let right = self.build_node(hi, depth + 1);
        self.nodes[node_index as usize].left = left;
        self.nodes[node_index as usize].right = right;
        node_index
    }

    /// Index of the nearest stored point and the squared distance to it.
    pub fn nearest(&self, query: &Point3<f64>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root, query, &mut best);
        best
    }

    fn search(&self, node: i32, query: &Point3<f64>, best: &mut (usize, f64)) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = &self.points[n.point as usize];
        let d2 = (p - query).norm_squared();
        if d2 < best.1 || (d2 == best.1 && (n.point as usize) < best.0) {
            *best = (n.point as usize, d2);
        }
        let delta = query[n.axis as usize] - p[n.axis as usize];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, query, best);
        if delta * delta <= best.1 {
            self.search(far, query, best);
        }
    }
}

/// Closed-form least-squares rigid fit mapping `source[i]` onto
/// `target[i]`.
///
/// The SVD sign correction forces a proper rotation even on reflection-prone
/// (near-planar) correspondence sets. Collinear or coincident
/// correspondences are rejected.
pub fn fit_rigid(source: &[Point3<f64>], target: &[Point3<f64>]) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::dims("rigid fit correspondences", source.len(), target.len()));
    }
    if source.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "rigid fit needs >= 3 correspondences, got {}",
            source.len()
        )));
    }

    let n = source.len() as f64;
    let mut sc = Vector3::zeros();
    let mut tc = Vector3::zeros();
    for (s, t) in source.iter().zip(target) {
        sc += s.coords;
        tc += t.coords;
    }
    sc /= n;
    tc /= n;

    let mut cross = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        cross += (s.coords - sc) * (t.coords - tc).transpose();
    }

    let svd = SVD::new(cross, true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let sv = svd.singular_values;
    if !(sv[0] > 0.0) || sv[1] <= sv[0] * 1e-12 {
        return Err(Error::DegenerateGeometry(
            "correspondence set is collinear or coincident".into(),
        ));
    }

    let v = v_t.transpose();
    let det = (v * u.transpose()).determinant();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    let rotation = v * correction * u.transpose();
    let translation = tc - rotation * sc;

    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Alignment outcome: the recovered transform, the transformed source mesh
/// and the RMS correspondence distance after each recorded iteration.
pub struct IcpResult {
    pub transform: RigidTransform,
    pub aligned: Mesh,
    /// Non-increasing by construction; the run stops once the improvement
    /// falls below the tolerance.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Aligns `source` onto `target` by alternating k-d tree nearest-neighbor
/// correspondence with the closed-form rigid fit.
///
/// Stops when the RMS correspondence distance improves by less than `tol`
/// or after `max_iter` iterations.
pub fn icp_align(source: &Mesh, target: &Mesh, max_iter: usize, tol: f64) -> Result<IcpResult> {
    if source.positions.is_empty() {
        return Err(Error::EmptyInput("icp source"));
    }
    if target.positions.is_empty() {
        return Err(Error::EmptyInput("icp target"));
    }
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(Error::InvalidInput(format!("invalid icp tolerance {tol}")));
    }

    let tree = KdTree3::build(&target.positions)?;
    let mut transform = RigidTransform::identity();
    let mut current = source.positions.clone();
    let mut matched: Vec<Point3<f64>> = Vec::with_capacity(current.len());
    let mut residuals = Vec::new();
    let mut prev = f64::INFINITY;
    let mut iterations = 0;

    for _ in 0..max_iter {
        matched.clear();
        let mut sum_sq = 0.0;
        for p in &current {
            let (idx, d2) = tree.nearest(p);
            sum_sq += d2;
            matched.push(target.positions[idx]);
        }
        let residual = (sum_sq / current.len() as f64).sqrt();
        if prev - residual < tol {
            break;
        }
        residuals.push(residual);
        prev = residual;
        iterations += 1;
        if residual == 0.0 {
            break;
        }

        let delta = fit_rigid(&current, &matched)?;
        for p in current.iter_mut() {
            *p = delta.apply(p);
        }
        transform = transform.then(&delta);
    }

    let aligned = Mesh {
        positions: current,
        colors: source.colors.clone(),
        triangles: source.triangles.clone(),
    };
    Ok(IcpResult {
        transform,
        aligned,
        residuals,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn cloud() -> Vec<Point3<f64>> {
        // Anisotropic, asymmetric spread.
        (0..60)
            .map(|i| {
                let t = i as f64 * 0.37;
                Point3::new(
                    40.0 * t.sin() + 3.0 * t,
                    20.0 * (1.3 * t).cos() - t,
                    8.0 * (0.7 * t).sin() + 0.5 * t * t.cos(),
                )
            })
            .collect()
    }

    fn mesh_of(points: Vec<Point3<f64>>) -> Mesh {
        Mesh {
            positions: points,
            colors: None,
            triangles: vec![],
        }
    }

    #[test]
    fn kdtree_agrees_with_linear_scan() {
        let points = cloud();
        let tree = KdTree3::build(&points).unwrap();
        for q in [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(17.0, -4.0, 3.0),
            Point3::new(-50.0, 21.0, -9.0),
        ] {
            let (idx, d2) = tree.nearest(&q);
            let brute = points
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (*a - q).norm_squared().partial_cmp(&(*b - q).norm_squared()).unwrap()
                })
                .unwrap();
            assert_eq!(idx, brute.0);
            assert!((d2 - (brute.1 - q).norm_squared()).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_rigid_recovers_known_transform() {
        let source = cloud();
        let truth = RigidTransform {
            rotation: *Rotation3::from_euler_angles(0.2, -0.4, 0.1).matrix(),
            translation: Vector3::new(5.0, -2.0, 9.0),
        };
        let target: Vec<_> = source.iter().map(|p| truth.apply(p)).collect();
        let fit = fit_rigid(&source, &target).unwrap();
        assert!(fit.rotation_angle_to(&truth) < 1e-10);
        assert!((fit.translation - truth.translation).norm() < 1e-9);
    }

    #[test]
    fn fit_rigid_forces_proper_rotation_on_planar_data() {
        // All points in the z = 0 plane: the unconstrained orthogonal fit
        // may be a reflection; the sign correction must prevent it.
        let source: Vec<_> = (0..20)
            .map(|i| {
                let t = i as f64;
                Point3::new(t.sin() * 10.0, (2.0 * t).cos() * 5.0, 0.0)
            })
            .collect();
        let truth = RigidTransform {
            rotation: *Rotation3::from_euler_angles(0.0, 0.0, 0.6).matrix(),
            translation: Vector3::new(1.0, 2.0, 0.0),
        };
        let target: Vec<_> = source.iter().map(|p| truth.apply(p)).collect();
        let fit = fit_rigid(&source, &target).unwrap();
        assert!(fit.rotation.determinant() > 0.0);
        fit.validate().unwrap();
        assert!(fit.rotation_angle_to(&truth) < 1e-8);
    }

    #[test]
    fn fit_rigid_rejects_collinear_points() {
        let source: Vec<_> = (0..5).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let target = source.clone();
        assert!(matches!(
            fit_rigid(&source, &target),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn icp_identity_on_identical_meshes() {
        let mesh = mesh_of(cloud());
        let result = icp_align(&mesh, &mesh, 50, 1e-12).unwrap();
        assert_eq!(result.transform, RigidTransform::identity());
        assert_eq!(result.residuals, vec![0.0]);
        assert_eq!(result.aligned.positions, mesh.positions);
    }

    #[test]
    fn icp_recovers_a_clean_transform() {
        let source = mesh_of(cloud());
        let truth = RigidTransform {
            rotation: *Rotation3::from_euler_angles(0.15, 0.25, -0.1).matrix(),
            translation: Vector3::new(8.0, -6.0, 4.0),
        };
        let target = mesh_of(source.positions.iter().map(|p| truth.apply(p)).collect());
        let result = icp_align(&source, &target, 100, 1e-12).unwrap();
        assert!(result.transform.rotation_angle_to(&truth) < 1e-6);
        assert!((result.transform.translation - truth.translation).norm() < 1e-6);
        for w in result.residuals.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn icp_rejects_empty_input() {
        let empty = mesh_of(vec![]);
        let mesh = mesh_of(cloud());
        assert!(icp_align(&empty, &mesh, 10, 1e-9).is_err());
        assert!(icp_align(&mesh, &empty, 10, 1e-9).is_err());
    }
}
