//! Orthographic frontal depth rendering.
//!
//! The camera sits at +Z looking down -Z, so "front-most" means the larger
//! z value wins the z-buffer. Pixels not covered by any triangle are
//! invalid (stored as NaN).

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::model::Mesh;

/// A square pixel lattice in the XY plane.
///
/// `origin` is the world xy of the lattice center; pixel `(row, col)` has
/// its center at
/// `x = origin.0 + (col + 0.5 - resolution/2) * pixel_scale`,
/// `y = origin.1 + (resolution/2 - row - 0.5) * pixel_scale`
/// (row 0 is the top of the map).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthGrid {
    pub resolution: usize,
    pub pixel_scale: f64,
    pub origin: (f64, f64),
}

impl DepthGrid {
    pub fn centered_on(mesh: &Mesh, resolution: usize, pixel_scale: f64) -> Self {
        let c = mesh.centroid();
        Self {
            resolution,
            pixel_scale,
            origin: (c.x, c.y),
        }
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let half = self.resolution as f64 / 2.0;
        (
            self.origin.0 + (col as f64 + 0.5 - half) * self.pixel_scale,
            self.origin.1 + (half - row as f64 - 0.5) * self.pixel_scale,
        )
    }
}

/// Rasterized frontal depth image; invalid pixels are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub grid: DepthGrid,
    /// Row-major, `resolution * resolution` values in millimeters.
    pub depth: Vec<f64>,
}

impl DepthMap {
    pub fn width(&self) -> usize {
        self.grid.resolution
    }

    pub fn height(&self) -> usize {
        self.grid.resolution
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.depth[row * self.grid.resolution + col]
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_finite()
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }
}

/// Renders a depth map on the given fixed grid.
///
/// Per-pixel depth comes from z-buffered rasterization of the mesh
/// triangles projected along -Z; the larger z wins. Degenerate (zero-area
/// in XY) triangles are skipped.
pub fn render_depth_on(mesh: &Mesh, grid: &DepthGrid) -> Result<DepthMap> {
    if grid.resolution == 0 {
        return Err(Error::InvalidInput("depth map resolution must be positive".into()));
    }
    if !(grid.pixel_scale > 0.0) || !grid.pixel_scale.is_finite() {
        return Err(Error::InvalidInput(format!(
            "invalid pixel scale {}",
            grid.pixel_scale
        )));
    }
    if mesh.triangles.is_empty() {
        return Err(Error::InvalidInput("mesh has no triangles to rasterize".into()));
    }
    mesh.validate()?;

    let res = grid.resolution;
    let half = res as f64 / 2.0;
    let mut depth = vec![f64::NAN; res * res];

    // World -> continuous pixel coordinates (integer value = pixel center).
    let to_col = |x: f64| (x - grid.origin.0) / grid.pixel_scale + half - 0.5;
    let to_row = |y: f64| half - 0.5 - (y - grid.origin.1) / grid.pixel_scale;

    for tri in &mesh.triangles {
        let p: Vec<&Point3<f64>> = tri.iter().map(|&i| &mesh.positions[i as usize]).collect();
        let (x0, y0, z0) = (p[0].x, p[0].y, p[0].z);
        let (x1, y1, z1) = (p[1].x, p[1].y, p[1].z);
        let (x2, y2, z2) = (p[2].x, p[2].y, p[2].z);

        let denom = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2);
        if denom.abs() < 1e-30 {
            continue;
        }

        let cols = [to_col(x0), to_col(x1), to_col(x2)];
        let rows = [to_row(y0), to_row(y1), to_row(y2)];
        let col_min = cols.iter().cloned().fold(f64::INFINITY, f64::min).ceil().max(0.0) as usize;
        let col_max =
            cols.iter().cloned().fold(f64::NEG_INFINITY, f64::max).floor().min(res as f64 - 1.0);
        let row_min = rows.iter().cloned().fold(f64::INFINITY, f64::min).ceil().max(0.0) as usize;
        let row_max =
            rows.iter().cloned().fold(f64::NEG_INFINITY, f64::max).floor().min(res as f64 - 1.0);
        if col_max < 0.0 || row_max < 0.0 {
            continue;
        }
        let (col_max, row_max) = (col_max as usize, row_max as usize);

        for row in row_min..=row_max {
            for col in col_min..=col_max {
                let (cx, cy) = grid.pixel_center(row, col);
                let l0 = ((y1 - y2) * (cx - x2) + (x2 - x1) * (cy - y2)) / denom;
                let l1 = ((y2 - y0) * (cx - x2) + (x0 - x2) * (cy - y2)) / denom;
                let l2 = 1.0 - l0 - l1;
                const EDGE_EPS: f64 = -1e-12;
                if l0 < EDGE_EPS || l1 < EDGE_EPS || l2 < EDGE_EPS {
                    continue;
                }
                let z = l0 * z0 + l1 * z1 + l2 * z2;
                let cell = &mut depth[row * res + col];
                if !cell.is_finite() || z > *cell {
                    *cell = z;
                }
            }
        }
    }

    let map = DepthMap { grid: *grid, depth };
    if map.valid_count() == 0 {
        return Err(Error::DegenerateGeometry(
            "no triangle covers any pixel at this resolution".into(),
        ));
    }
    Ok(map)
}

/// Renders on a grid centered at the mesh centroid.
pub fn render_depth(mesh: &Mesh, resolution: usize, pixel_scale: f64) -> Result<DepthMap> {
    let grid = DepthGrid::centered_on(mesh, resolution, pixel_scale);
    render_depth_on(mesh, &grid)
}
