//! ASCII PLY mesh import/export.
//!
//! Positions are written as `double` properties so coordinates survive the
//! round trip exactly; colors, when present, are `uchar` RGB.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::model::Mesh;

/// Writes a mesh as ASCII PLY.
pub fn write_ply<W: Write>(out: &mut W, mesh: &Mesh) -> Result<()> {
    mesh.validate()?;
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", mesh.positions.len())?;
    writeln!(out, "property double x")?;
    writeln!(out, "property double y")?;
    writeln!(out, "property double z")?;
    if mesh.colors.is_some() {
        writeln!(out, "property uchar red")?;
        writeln!(out, "property uchar green")?;
        writeln!(out, "property uchar blue")?;
    }
    writeln!(out, "element face {}", mesh.triangles.len())?;
    writeln!(out, "property list uchar uint vertex_indices")?;
    writeln!(out, "end_header")?;

    match &mesh.colors {
        Some(colors) => {
            for (p, c) in mesh.positions.iter().zip(colors) {
                writeln!(
                    out,
                    "{} {} {} {} {} {}",
                    p.x,
                    p.y,
                    p.z,
                    c[0].clamp(0.0, 255.0).round() as u8,
                    c[1].clamp(0.0, 255.0).round() as u8,
                    c[2].clamp(0.0, 255.0).round() as u8
                )?;
            }
        }
        None => {
            for p in &mesh.positions {
                writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
            }
        }
    }
    for tri in &mesh.triangles {
        writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2])?;
    }
    Ok(())
}

pub fn save_ply(path: &Path, mesh: &Mesh) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_ply(&mut out, mesh)?;
    out.flush()?;
    Ok(())
}

#[derive(Default)]
struct HeaderInfo {
    vertex_count: usize,
    face_count: usize,
    /// Column index of each vertex property, in declaration order.
    vertex_properties: Vec<String>,
}

fn parse_header<B: BufRead>(lines: &mut std::io::Lines<B>) -> Result<HeaderInfo> {
    let magic = lines
        .next()
        .ok_or_else(|| Error::Format("empty ply file".into()))??;
    if magic.trim() != "ply" {
        return Err(Error::Format("missing ply magic line".into()));
    }

    let mut info = HeaderInfo::default();
    let mut current_element = String::new();
    for line in lines.by_ref() {
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] | ["comment", ..] => continue,
            ["format", kind, _version] => {
                if *kind != "ascii" {
                    return Err(Error::Format(format!("unsupported ply format {kind:?}")));
                }
            }
            ["element", name, count] => {
                current_element = (*name).to_string();
                let count: usize = count
                    .parse()
                    .map_err(|_| Error::Format(format!("bad element count in {line:?}")))?;
                match *name {
                    "vertex" => info.vertex_count = count,
                    "face" => info.face_count = count,
                    _ => {}
                }
            }
            ["property", "list", _count_type, _index_type, name] => {
                if current_element == "face" && !name.starts_with("vertex_ind") {
                    return Err(Error::Format(format!("unsupported face property {name:?}")));
                }
            }
            ["property", _type, name] => {
                if current_element == "vertex" {
                    info.vertex_properties.push((*name).to_string());
                }
            }
            ["end_header"] => return Ok(info),
            _ => return Err(Error::Format(format!("unrecognized header line {line:?}"))),
        }
    }
    Err(Error::Format("header ended without end_header".into()))
}

/// Reads an ASCII PLY mesh.
///
/// Requires `x`, `y`, `z` vertex properties; picks up `red`, `green`,
/// `blue` when all three are declared. Faces must be triangles.
pub fn read_ply<B: BufRead>(input: B) -> Result<Mesh> {
    let mut lines = input.lines();
    let header = parse_header(&mut lines)?;

    let index_of = |name: &str| header.vertex_properties.iter().position(|p| p == name);
    let (ix, iy, iz) = match (index_of("x"), index_of("y"), index_of("z")) {
        (Some(ix), Some(iy), Some(iz)) => (ix, iy, iz),
        _ => return Err(Error::Format("ply vertex element lacks x/y/z".into())),
    };
    let color_indices = match (index_of("red"), index_of("green"), index_of("blue")) {
        (Some(r), Some(g), Some(b)) => Some((r, g, b)),
        _ => None,
    };

    let parse_field = |fields: &[&str], idx: usize, line: &str| -> Result<f64> {
        fields
            .get(idx)
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| Error::Format(format!("bad vertex line {line:?}")))
    };

    let mut positions = Vec::with_capacity(header.vertex_count);
    let mut colors = color_indices.map(|_| Vec::with_capacity(header.vertex_count));
    while positions.len() < header.vertex_count {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format("ply truncated in vertex list".into()))??;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        positions.push(Point3::new(
            parse_field(&fields, ix, &line)?,
            parse_field(&fields, iy, &line)?,
            parse_field(&fields, iz, &line)?,
        ));
        if let (Some(out), Some((r, g, b))) = (&mut colors, color_indices) {
            out.push([
                parse_field(&fields, r, &line)?,
                parse_field(&fields, g, &line)?,
                parse_field(&fields, b, &line)?,
            ]);
        }
    }

    let mut triangles = Vec::with_capacity(header.face_count);
    while triangles.len() < header.face_count {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format("ply truncated in face list".into()))??;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let count: usize = fields
            .first()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad face line {line:?}")))?;
        if count != 3 || fields.len() != 4 {
            return Err(Error::Format(format!(
                "only triangle faces are supported, got {line:?}"
            )));
        }
        let mut tri = [0u32; 3];
        for (slot, field) in tri.iter_mut().zip(&fields[1..]) {
            *slot = field
                .parse()
                .map_err(|_| Error::Format(format!("bad face index in {line:?}")))?;
        }
        triangles.push(tri);
    }

    let mesh = Mesh {
        positions,
        colors,
        triangles,
    };
    mesh.validate()?;
    Ok(mesh)
}

pub fn load_ply(path: &Path) -> Result<Mesh> {
    read_ply(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_mesh(colored: bool) -> Mesh {
        Mesh {
            positions: vec![
                Point3::new(0.0, 0.0, 1.5),
                Point3::new(1.0, 0.25, 2.0),
                Point3::new(0.5, 1.0, 1.75),
            ],
            colors: colored.then(|| vec![[255.0, 0.0, 10.0], [0.0, 128.0, 0.0], [1.0, 2.0, 3.0]]),
            triangles: vec![[0, 1, 2]],
        }
    }

    #[test]
    fn round_trip_with_colors() {
        let mesh = sample_mesh(true);
        let mut buf = Vec::new();
        write_ply(&mut buf, &mesh).unwrap();
        let back = read_ply(buf.as_slice()).unwrap();
        assert_eq!(back.positions, mesh.positions);
        assert_eq!(back.triangles, mesh.triangles);
        assert_eq!(back.colors, mesh.colors);
    }

    #[test]
    fn round_trip_without_colors() {
        let mesh = sample_mesh(false);
        let mut buf = Vec::new();
        write_ply(&mut buf, &mesh).unwrap();
        let back = read_ply(buf.as_slice()).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn writer_is_deterministic() {
        let mesh = sample_mesh(true);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_ply(&mut a, &mesh).unwrap();
        write_ply(&mut b, &mesh).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_triangle_faces() {
        let text = "ply\nformat ascii 1.0\nelement vertex 4\nproperty double x\nproperty double y\nproperty double z\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(matches!(read_ply(text.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_binary_format() {
        let text = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(matches!(read_ply(text.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n0 0 0\n1 0 0\n3 0 1 5\n";
        assert!(read_ply(text.as_bytes()).is_err());
    }
}
