//! Versioned binary container for models and regressor checkpoints.
//!
//! Layout: an 8-byte magic, a little-endian u32 header length, a JSON
//! header, then the payload arrays in declared order as little-endian f32
//! (and u32 for triangle indices). This is the documented import path for
//! users converting their own licensed model data.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MorphableModel;
use crate::regressor::LinearRegressor;

const MODEL_MAGIC: &[u8; 8] = b"MM3DMDL\0";
const REGRESSOR_MAGIC: &[u8; 8] = b"MM3DREG\0";
const FORMAT_VERSION: u32 = 1;

/// JSON header of a model container. Payload order: mean_shape,
/// mean_texture, shape_basis (column-major), texture_basis (column-major),
/// shape_sigmas, texture_sigmas as f32, then triangle index triples as u32.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub version: u32,
    pub vertex_count: usize,
    pub shape_dim: usize,
    pub texture_dim: usize,
    pub landmarks: std::collections::BTreeMap<String, u32>,
    pub triangle_count: usize,
}

/// JSON header of a regressor checkpoint. Payload order: weights
/// (column-major), bias as f32.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorHeader {
    pub version: u32,
    pub feature_dim: usize,
    pub shape_dim: usize,
    pub texture_dim: usize,
}

fn write_header<W: Write>(out: &mut W, magic: &[u8; 8], header_json: &str) -> Result<()> {
    out.write_all(magic)?;
    out.write_u32::<LittleEndian>(header_json.len() as u32)?;
    out.write_all(header_json.as_bytes())?;
    Ok(())
}

fn read_header<R: Read>(input: &mut R, magic: &[u8; 8]) -> Result<String> {
    let mut found = [0u8; 8];
    input.read_exact(&mut found)?;
    if &found != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&found),
            String::from_utf8_lossy(magic)
        )));
    }
    let len = input.read_u32::<LittleEndian>()? as usize;
    if len > 16 * 1024 * 1024 {
        return Err(Error::Format(format!("implausible header length {len}")));
    }
    let mut buf = vec![0u8; len];
    input.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("header is not utf-8: {e}")))
}

fn write_f32s<W: Write>(out: &mut W, values: impl Iterator<Item = f64>) -> Result<()> {
    for v in values {
        out.write_f32::<LittleEndian>(v as f32)?;
    }
    Ok(())
}

fn read_f32s<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(input.read_f32::<LittleEndian>()? as f64);
    }
    Ok(out)
}

/// Serializes a model to a writer.
pub fn write_model<W: Write>(out: &mut W, model: &MorphableModel) -> Result<()> {
    model.validate()?;
    let header = ModelHeader {
        version: FORMAT_VERSION,
        vertex_count: model.vertex_count(),
        shape_dim: model.shape_dim(),
        texture_dim: model.texture_dim(),
        landmarks: model.landmarks.clone(),
        triangle_count: model.triangles.len(),
    };
    let json = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    write_header(out, MODEL_MAGIC, &json)?;

    write_f32s(out, model.mean_shape.iter().copied())?;
    write_f32s(out, model.mean_texture.iter().copied())?;
    write_f32s(out, model.shape_basis.as_slice().iter().copied())?;
    write_f32s(out, model.texture_basis.as_slice().iter().copied())?;
    write_f32s(out, model.shape_sigmas.iter().copied())?;
    write_f32s(out, model.texture_sigmas.iter().copied())?;
    for tri in &model.triangles {
        for &i in tri {
            out.write_u32::<LittleEndian>(i)?;
        }
    }
    Ok(())
}

/// Deserializes a model from a reader. Values round-trip through f32.
pub fn read_model<R: Read>(input: &mut R) -> Result<MorphableModel> {
    let json = read_header(input, MODEL_MAGIC)?;
    let header: ModelHeader =
        serde_json::from_str(&json).map_err(|e| Error::Format(format!("model header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported model format version {}",
            header.version
        )));
    }
    let rows = 3 * header.vertex_count;

    let mean_shape = DVector::from_vec(read_f32s(input, rows)?);
    let mean_texture = DVector::from_vec(read_f32s(input, rows)?);
    let shape_basis =
        DMatrix::from_vec(rows, header.shape_dim, read_f32s(input, rows * header.shape_dim)?);
    let texture_basis = DMatrix::from_vec(
        rows,
        header.texture_dim,
        read_f32s(input, rows * header.texture_dim)?,
    );
    let shape_sigmas = DVector::from_vec(read_f32s(input, header.shape_dim)?);
    let texture_sigmas = DVector::from_vec(read_f32s(input, header.texture_dim)?);

    let mut triangles = Vec::with_capacity(header.triangle_count);
    for _ in 0..header.triangle_count {
        let a = input.read_u32::<LittleEndian>()?;
        let b = input.read_u32::<LittleEndian>()?;
        let c = input.read_u32::<LittleEndian>()?;
        triangles.push([a, b, c]);
    }

    let model = MorphableModel {
        mean_shape,
        mean_texture,
        shape_basis,
        texture_basis,
        shape_sigmas,
        texture_sigmas,
        triangles,
        landmarks: header.landmarks,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model(path: &Path, model: &MorphableModel) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(&mut out, model)?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MorphableModel> {
    read_model(&mut BufReader::new(File::open(path)?))
}

/// Serializes a regressor checkpoint to a writer.
pub fn write_regressor<W: Write>(out: &mut W, reg: &LinearRegressor) -> Result<()> {
    reg.validate()?;
    let header = RegressorHeader {
        version: FORMAT_VERSION,
        feature_dim: reg.weights.nrows(),
        shape_dim: reg.k_shape,
        texture_dim: reg.k_texture,
    };
    let json = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    write_header(out, REGRESSOR_MAGIC, &json)?;
    write_f32s(out, reg.weights.as_slice().iter().copied())?;
    write_f32s(out, reg.bias.iter().copied())?;
    Ok(())
}

/// Deserializes a regressor checkpoint. Values round-trip through f32.
pub fn read_regressor<R: Read>(input: &mut R) -> Result<LinearRegressor> {
    let json = read_header(input, REGRESSOR_MAGIC)?;
    let header: RegressorHeader = serde_json::from_str(&json)
        .map_err(|e| Error::Format(format!("regressor header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint format version {}",
            header.version
        )));
    }
    let out_len = header.shape_dim + header.texture_dim;
    let weights = DMatrix::from_vec(
        header.feature_dim,
        out_len,
        read_f32s(input, header.feature_dim * out_len)?,
    );
    let bias = DVector::from_vec(read_f32s(input, out_len)?);
    let reg = LinearRegressor {
        weights,
        bias,
        k_shape: header.shape_dim,
        k_texture: header.texture_dim,
    };
    reg.validate()?;
    Ok(reg)
}

pub fn save_regressor(path: &Path, reg: &LinearRegressor) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_regressor(&mut out, reg)?;
    out.flush()?;
    Ok(())
}

pub fn load_regressor(path: &Path) -> Result<LinearRegressor> {
    read_regressor(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_synthetic_model;

    #[test]
    fn model_round_trip_preserves_structure() {
        let model = generate_synthetic_model(5, 25, 4, 3).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &model).unwrap();
        let back = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(back.vertex_count(), model.vertex_count());
        assert_eq!(back.shape_dim(), model.shape_dim());
        assert_eq!(back.texture_dim(), model.texture_dim());
        assert_eq!(back.triangles, model.triangles);
        assert_eq!(back.landmarks, model.landmarks);
        // Values round-trip through f32.
        for (a, b) in back.mean_shape.iter().zip(model.mean_shape.iter()) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn second_serialization_is_byte_identical() {
        let model = generate_synthetic_model(6, 30, 5, 5).unwrap();
        let mut first = Vec::new();
        write_model(&mut first, &model).unwrap();
        let reloaded = read_model(&mut first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_model(&mut second, &reloaded).unwrap();
        let reloaded2 = read_model(&mut second.as_slice()).unwrap();
        let mut third = Vec::new();
        write_model(&mut third, &reloaded2).unwrap();
        assert_eq!(second, third);
    }

    #[test]
    fn regressor_round_trip() {
        let mut reg = LinearRegressor::zeros(3, 2, 2);
        reg.weights[(0, 1)] = 0.5;
        reg.weights[(2, 3)] = -1.25;
        reg.bias[0] = 3.0;
        let mut buf = Vec::new();
        write_regressor(&mut buf, &reg).unwrap();
        let back = read_regressor(&mut buf.as_slice()).unwrap();
        assert_eq!(back, reg);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut reg_bytes = Vec::new();
        write_regressor(&mut reg_bytes, &LinearRegressor::zeros(2, 1, 1)).unwrap();
        assert!(matches!(
            read_model(&mut reg_bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn truncated_payload_is_an_io_error() {
        let model = generate_synthetic_model(5, 25, 4, 3).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &model).unwrap();
        buf.truncate(buf.len() - 10);
        assert!(read_model(&mut buf.as_slice()).is_err());
    }
}
