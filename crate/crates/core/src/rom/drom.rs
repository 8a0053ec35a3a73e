//! "DROM": magic, version, rank r, state size n, frame h and w (u64 each),
//! r eigenvalues (re, im), the n x r modes column-major as (re, im) pairs,
//! r amplitudes (re, im), then a CRC32 of all preceding bytes.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::dmd::DmdModel;
use crate::error::{FormatError, Result};
use crate::io::{at_path, read_file, write_file, Reader, Writer};

pub const DROM_MAGIC: &[u8; 4] = b"DROM";
pub const DROM_VERSION: u32 = 1;

fn put(w: &mut Writer, values: &[Complex64]) {
    for c in values {
        w.f64(c.re);
        w.f64(c.im);
    }
}

fn get(r: &mut Reader, n: usize) -> Result<Vec<Complex64>, FormatError> {
    let flat = r.f64s(n.checked_mul(2).ok_or_else(|| FormatError::Malformed("length overflow".into()))?)?;
    Ok(flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

pub fn encode_drom(model: &DmdModel) -> Vec<u8> {
    let mut w = Writer::new(DROM_MAGIC, DROM_VERSION);
    for v in [model.rank(), model.modes.nrows(), model.shape.0, model.shape.1] {
        w.u64(v as u64);
    }
    put(&mut w, &model.eigenvalues);
    put(&mut w, model.modes.as_slice());
    put(&mut w, &model.amplitudes);
    w.finish()
}

pub fn decode_drom(bytes: &[u8]) -> Result<DmdModel, FormatError> {
    let mut r = Reader::open(bytes, DROM_MAGIC, DROM_VERSION)?;
    let mut dim = || -> Result<usize, FormatError> {
        usize::try_from(r.u64()?).map_err(|_| FormatError::Malformed("dimension overflow".into()))
    };
    let (rank, n, h, w) = (dim()?, dim()?, dim()?, dim()?);
    if h.checked_mul(w) != Some(n) {
        return Err(FormatError::Malformed(format!("state size {n} is not {h} x {w}")));
    }
    let eigenvalues = get(&mut r, rank)?;
    let modes = get(&mut r, n.checked_mul(rank).ok_or_else(|| FormatError::Malformed("length overflow".into()))?)?;
    let amplitudes = get(&mut r, rank)?;
    r.finish()?;
    Ok(DmdModel { eigenvalues, modes: DMatrix::from_vec(n, rank, modes), amplitudes, shape: (h, w) })
}

pub fn write_drom(model: &DmdModel, path: &Path) -> Result<()> {
    write_file(path, &encode_drom(model))
}

pub fn read_drom(path: &Path) -> Result<DmdModel> {
    decode_drom(&read_file(path)?).map_err(|e| at_path(path)(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> DmdModel {
        DmdModel {
            eigenvalues: vec![Complex64::new(0.9, 0.1), Complex64::new(0.9, -0.1)],
            modes: DMatrix::from_fn(6, 2, |i, j| Complex64::new(i as f64 * 0.5 - j as f64, 1.0 / (1.0 + i as f64))),
            amplitudes: vec![Complex64::new(1.5, -2.0), Complex64::new(1.5, 2.0)],
            shape: (2, 3),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let bytes = encode_drom(&m);
        assert_eq!(bytes.len(), 8 + 32 + 16 * (2 + 12 + 2) + 4);
        assert_eq!(decode_drom(&bytes).unwrap(), m);
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = encode_drom(&model());
        assert!(matches!(decode_drom(&bytes[..bytes.len() - 9]), Err(FormatError::Truncated { .. })));
        let n = bytes.len();
        bytes[n - 10] ^= 1;
        assert!(matches!(decode_drom(&bytes), Err(FormatError::Checksum { .. })));
        assert!(matches!(decode_drom(b"DKPT\x01\0\0\0"), Err(FormatError::Magic { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/m.drom");
        write_drom(&model(), &p).unwrap();
        assert_eq!(read_drom(&p).unwrap(), model());
    }
}
