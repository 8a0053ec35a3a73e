use std::path::Path;

use super::{CaseRecord, Dataset, LoadFrame};
use crate::error::{FormatError, Result};
use crate::io::{at_path, read_file, write_file, Reader, Writer};

pub const DLF_MAGIC: &[u8; 4] = b"DLF1";
pub const DLF_VERSION: u32 = 1;

/// Little-endian layout: magic, version, case count; per case u0, w0,
/// pitch0 (f64), n_t, h, w, origin pair (u32) and the f32 payload; then
/// x_min, x_max (f64) and the CRC32 of all preceding bytes.
pub fn encode_dlf(dataset: &Dataset) -> Vec<u8> {
    let mut w = Writer::new(DLF_MAGIC, DLF_VERSION);
    w.u32(dataset.cases.len() as u32);
    for case in &dataset.cases {
        let (h, wd) = case.shape().unwrap_or((0, 0));
        w.f64(case.u0_mps);
        w.f64(case.w0_mps);
        w.f64(case.pitch0_deg);
        w.u32(case.frames.len() as u32);
        w.u32(h as u32);
        w.u32(wd as u32);
        w.u32(case.patch_origin.0);
        w.u32(case.patch_origin.1);
        for f in &case.frames {
            w.f32s(&f.data);
        }
    }
    w.f64(dataset.x_min);
    w.f64(dataset.x_max);
    w.finish()
}

pub fn decode_dlf(bytes: &[u8]) -> Result<Dataset, FormatError> {
    let mut r = Reader::open(bytes, DLF_MAGIC, DLF_VERSION)?;
    let n_cases = r.u32()?;
    let mut cases = Vec::new();
    for _ in 0..n_cases {
        let (u0_mps, w0_mps, pitch0_deg) = (r.f64()?, r.f64()?, r.f64()?);
        let (n_t, h, w) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let patch_origin = (r.u32()?, r.u32()?);
        if n_t > 0 && h * w == 0 {
            return Err(FormatError::Malformed(format!("case with {n_t} frames of size {h}x{w}")));
        }
        let frames = (0..n_t).map(|_| Ok(LoadFrame { h, w, data: r.f32s(h * w)? })).collect::<Result<_, FormatError>>()?;
        cases.push(CaseRecord { u0_mps, w0_mps, pitch0_deg, patch_origin, frames });
    }
    let (x_min, x_max) = (r.f64()?, r.f64()?);
    r.finish()?;
    Ok(Dataset { cases, x_min, x_max })
}

pub fn write_dlf(dataset: &Dataset, path: &Path) -> Result<()> {
    write_file(path, &encode_dlf(dataset))
}

pub fn read_dlf(path: &Path) -> Result<Dataset> {
    let bytes = read_file(path)?;
    decode_dlf(&bytes).map_err(|e| at_path(path)(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn fixture() -> Dataset {
        let case = |n_t: usize, seed: f32| CaseRecord {
            u0_mps: 70.0 + seed as f64,
            w0_mps: 1.5,
            pitch0_deg: 6.0,
            patch_origin: (3, 0),
            frames: (0..n_t)
                .map(|k| LoadFrame::new(2, 3, (0..6).map(|i| seed * 1e4 + (k * 6 + i) as f32 * 0.1).collect()).unwrap())
                .collect(),
        };
        Dataset { cases: vec![case(5, 1.0), case(7, 2.5)], x_min: -3.0e5, x_max: 1.2e6 }
    }

    #[test]
    fn round_trip_is_bit_exact_and_keeps_lengths() {
        let d = fixture();
        let back = decode_dlf(&encode_dlf(&d)).unwrap();
        assert_eq!(back.cases.iter().map(CaseRecord::len).collect::<Vec<_>>(), vec![5, 7]);
        assert_eq!(back, d);
        assert_eq!(encode_dlf(&back), encode_dlf(&d));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/d.dlf");
        write_dlf(&fixture(), &path).unwrap();
        assert_eq!(read_dlf(&path).unwrap(), fixture());
    }

    #[test]
    fn header_layout_is_little_endian() {
        let bytes = encode_dlf(&fixture());
        assert_eq!(&bytes[..4], b"DLF1");
        assert_eq!(bytes[4..8], 1u32.to_le_bytes());
        assert_eq!(bytes[8..12], 2u32.to_le_bytes());
        assert_eq!(bytes[12..20], 71.0f64.to_le_bytes());
        // header 12 + per case (24 + 20 + 24 n_t) + 16 + crc 4
        assert_eq!(bytes.len(), 12 + (44 + 24 * 5) + (44 + 24 * 7) + 16 + 4);
    }

    #[test]
    fn corruption_is_reported_distinctly() {
        let good = encode_dlf(&fixture());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_dlf(&bad), Err(FormatError::Magic { .. })));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_dlf(&bad), Err(FormatError::Version { found: 2, .. })));
        assert!(matches!(decode_dlf(&good[..good.len() - 40]), Err(FormatError::Truncated { .. })));
        let mut bad = good.clone();
        bad[80] ^= 1;
        assert!(matches!(decode_dlf(&bad), Err(FormatError::Checksum { .. })));
    }

    #[test]
    fn read_error_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.dlf");
        std::fs::write(&path, b"NOPE0000").unwrap();
        let err = read_dlf(&path).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().contains("bad.dlf"));
        assert_eq!(err.exit_code(), 4);
    }
}
