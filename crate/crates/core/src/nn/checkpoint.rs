use std::path::Path;

use super::tensor::Tensor;
use crate::error::{FormatError, Result};
use crate::io::{at_path, read_file, write_file, Reader, Writer};

pub const DKPT_MAGIC: &[u8; 4] = b"DKPT";
pub const DKPT_VERSION: u32 = 1;

/// Little-endian layout: magic, version, metadata (u32 length + UTF-8 JSON
/// describing the model), tensor count; per tensor name (u32 length +
/// UTF-8), rank, dims (u32) and f32 values; then the CRC32 of all preceding
/// bytes. Tensors are written in name order.
pub fn encode_checkpoint(meta: &str, tensors: &[(String, Tensor<f32>)]) -> Vec<u8> {
    let mut sorted: Vec<&(String, Tensor<f32>)> = tensors.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut w = Writer::new(DKPT_MAGIC, DKPT_VERSION);
    w.bytes(meta.as_bytes());
    w.u32(sorted.len() as u32);
    for (name, t) in sorted {
        w.bytes(name.as_bytes());
        w.u32(t.shape.len() as u32);
        for &d in &t.shape {
            w.u32(d as u32);
        }
        w.f32s(&t.data);
    }
    w.finish()
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(String, Vec<(String, Tensor<f32>)>), FormatError> {
    let mut r = Reader::open(bytes, DKPT_MAGIC, DKPT_VERSION)?;
    let utf8 = |b: &[u8]| String::from_utf8(b.to_vec()).map_err(|_| FormatError::Malformed("non UTF-8 string".into()));
    let meta = utf8(r.bytes()?)?;
    let n = r.u32()?;
    let mut tensors = Vec::new();
    for _ in 0..n {
        let name = utf8(r.bytes()?)?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let data = r.f32s(shape.iter().product())?;
        tensors.push((name, Tensor { shape, data }));
    }
    r.finish()?;
    Ok((meta, tensors))
}

pub fn write_checkpoint(path: &Path, meta: &str, tensors: &[(String, Tensor<f32>)]) -> Result<()> {
    write_file(path, &encode_checkpoint(meta, tensors))
}

pub fn read_checkpoint(path: &Path) -> Result<(String, Vec<(String, Tensor<f32>)>)> {
    let bytes = read_file(path)?;
    decode_checkpoint(&bytes).map_err(|e| at_path(path)(e.into()))
}
