//! Depth-map export: a PGM-style ASCII value grid plus a JSON sidecar
//! carrying the pixel scale and world origin.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{DepthGrid, DepthMap};

/// Sidecar metadata stored next to the value grid.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DepthSidecar {
    pub resolution: usize,
    pub pixel_scale: f64,
    pub origin: [f64; 2],
}

/// Writes the value grid: a `P2F` marker line, `width height`, then one
/// whitespace-separated row per line with `nan` for invalid pixels.
pub fn write_depth_grid<W: Write>(out: &mut W, map: &DepthMap) -> Result<()> {
    writeln!(out, "P2F")?;
    writeln!(out, "{} {}", map.width(), map.height())?;
    for row in 0..map.height() {
        let mut line = String::new();
        for col in 0..map.width() {
            if col > 0 {
                line.push(' ');
            }
            let v = map.get(row, col);
            if v.is_finite() {
                line.push_str(&format!("{v}"));
            } else {
                line.push_str("nan");
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a `P2F` value grid written by [`write_depth_grid`].
pub fn read_depth_grid<R: Read>(input: R, grid: DepthGrid) -> Result<DepthMap> {
    let mut lines = BufReader::new(input).lines();
    let magic = lines
        .next()
        .ok_or_else(|| Error::Format("empty depth grid".into()))??;
    if magic.trim() != "P2F" {
        return Err(Error::Format(format!("bad depth grid marker {magic:?}")));
    }
    let dims = lines
        .next()
        .ok_or_else(|| Error::Format("depth grid missing dimensions".into()))??;
    let parts: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Format(format!("bad dimensions {dims:?}"))))
        .collect::<Result<_>>()?;
    let [width, height] = parts.as_slice() else {
        return Err(Error::Format(format!("bad dimensions {dims:?}")));
    };
    if *width != grid.resolution || *height != grid.resolution {
        return Err(Error::dims("depth grid resolution", grid.resolution, *width));
    }

    let mut depth = Vec::with_capacity(width * height);
    for line in lines {
        let line = line?;
        for token in line.split_whitespace() {
            if token.eq_ignore_ascii_case("nan") {
                depth.push(f64::NAN);
            } else {
                depth.push(
                    token
                        .parse()
                        .map_err(|_| Error::Format(format!("bad depth value {token:?}")))?,
                );
            }
        }
    }
    if depth.len() != width * height {
        return Err(Error::dims("depth values", width * height, depth.len()));
    }
    Ok(DepthMap { grid, depth })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Writes `<path>` (value grid) and `<path>.json` (sidecar).
pub fn save_depth_map(path: &Path, map: &DepthMap) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_depth_grid(&mut out, map)?;
    out.flush()?;
    let sidecar = DepthSidecar {
        resolution: map.grid.resolution,
        pixel_scale: map.grid.pixel_scale,
        origin: [map.grid.origin.0, map.grid.origin.1],
    };
    let json =
        serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Reads a depth map written by [`save_depth_map`].
pub fn load_depth_map(path: &Path) -> Result<DepthMap> {
    let json = std::fs::read_to_string(sidecar_path(path))?;
    let sidecar: DepthSidecar =
        serde_json::from_str(&json).map_err(|e| Error::Format(format!("depth sidecar: {e}")))?;
    let grid = DepthGrid {
        resolution: sidecar.resolution,
        pixel_scale: sidecar.pixel_scale,
        origin: (sidecar.origin[0], sidecar.origin[1]),
    };
    read_depth_grid(File::open(path)?, grid)
}
