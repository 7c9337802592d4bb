//! Binary dense-matrix container.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | content                         |
//! |--------|------|---------------------------------|
//! | 0      | 4    | magic `HBMX`                    |
//! | 4      | 4    | format version (u32)            |
//! | 8      | 8    | rows (u64)                      |
//! | 16     | 8    | cols (u64)                      |
//! | 24     | 8·rows·cols | row-major f64 payload    |
//! | end−32 | 32   | SHA-256 of all preceding bytes  |

use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"HBMX";
pub const VERSION: u32 = 1;
const HEADER: usize = 24;
const TRAILER: usize = 32;

pub fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * m.len() + TRAILER);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Parses an encoded matrix; `path` only labels errors.
pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<DMatrix<f64>> {
    let corrupt = || Error::Checksum(path.to_path_buf());
    if bytes.len() < HEADER + TRAILER || bytes[..4] != MAGIC {
        return Err(corrupt());
    }
    let (body, digest) = bytes.split_at(bytes.len() - TRAILER);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt());
    }
    let version = u32::from_le_bytes(body[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: VERSION,
        });
    }
    let rows = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(body[16..24].try_into().expect("8 bytes")) as usize;
    let payload = &body[HEADER..];
    if rows.checked_mul(cols).and_then(|n| n.checked_mul(8)) != Some(payload.len()) {
        return Err(corrupt());
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    Ok(DMatrix::from_row_iterator(rows, cols, values))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, encode_matrix(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes, path)
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("m.hbmx")
    }

    #[test]
    fn header_layout() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = encode_matrix(&m);
        assert_eq!(&b[..4], b"HBMX");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 3);
        // Row-major: the second stored value is m[(0, 1)].
        assert_eq!(f64::from_le_bytes(b[32..40].try_into().unwrap()), 2.0);
        assert_eq!(b.len(), 24 + 48 + 32);
    }

    #[test]
    fn corruption_is_detected() {
        let m = DMatrix::from_element(3, 3, 0.25);
        let mut b = encode_matrix(&m);
        b[30] ^= 1;
        assert!(matches!(decode_matrix(&b, p()), Err(Error::Checksum(_))));
        let b = encode_matrix(&m);
        assert!(matches!(decode_matrix(&b[..b.len() - 1], p()), Err(Error::Checksum(_))));
        assert!(matches!(decode_matrix(b"nope", p()), Err(Error::Checksum(_))));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let m = DMatrix::from_element(1, 1, 1.0);
        let mut b = encode_matrix(&m);
        b[4] = 9;
        let body = b.len() - 32;
        let digest = Sha256::digest(&b[..body]);
        b[body..].copy_from_slice(&digest);
        assert!(matches!(decode_matrix(&b, p()), Err(Error::Version { found: 9, expected: 1, .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.hbmx");
        let m = DMatrix::from_fn(4, 2, |i, j| (i as f64 + 0.1).powi(j as i32 + 3) * 1e-7);
        write_matrix(&path, &m).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);
        assert!(read_matrix(&dir.path().join("missing.hbmx")).is_err());
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            let m = DMatrix::from_fn(rows, cols, |i, j| {
                let bits = seed.rotate_left((i * 7 + j * 13) as u32) ^ 0x3ff0_0000_0000_0000;
                f64::from_bits(bits & 0x7fef_ffff_ffff_ffff)
            });
            let back = decode_matrix(&encode_matrix(&m), p()).unwrap();
            prop_assert_eq!(back.shape(), m.shape());
            for (a, b) in back.iter().zip(m.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
