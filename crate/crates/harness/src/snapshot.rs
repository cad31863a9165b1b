//! Binary field snapshots: fixed little-endian header, row-major f64
//! payload, and a SHA-256 checksum over header and payload.
//!
//! Layout: magic `NLDF` (4 bytes) | version u16 | scheme u8 | pad u8 |
//! n u32 | half_width f64 | time f64 | payload n*n f64 | checksum 32 bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use nldiff_core::{Field2D, Grid2D};

const MAGIC: &[u8; 4] = b"NLDF";
const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a field snapshot (bad magic)")]
    BadMagic,
    #[error("snapshot version {found} incompatible with supported version {supported}")]
    Version { found: u16, supported: u16 },
    #[error("snapshot corrupted: {0}")]
    Corrupted(String),
    #[error(transparent)]
    Core(#[from] nldiff_core::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub field: Field2D,
    pub time: f64,
    pub scheme_tag: u8,
}

pub fn snapshot_save(path: &Path, field: &Field2D, time: f64, scheme_tag: u8) -> Result<(), SnapshotError> {
    let grid = field.grid();
    let mut bytes = Vec::with_capacity(24 + field.as_slice().len() * 8 + 32);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.push(scheme_tag);
    bytes.push(0);
    bytes.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    bytes.extend_from_slice(&grid.half_width().to_le_bytes());
    bytes.extend_from_slice(&time.to_le_bytes());
    for v in field.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn snapshot_load(path: &Path) -> Result<Snapshot, SnapshotError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 28 + 32 {
        return Err(SnapshotError::Corrupted("file shorter than header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(SnapshotError::Version { found: version, supported: VERSION });
    }
    let scheme_tag = bytes[6];
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let half_width = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let time = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let payload_len = n * n * 8;
    let expected = 28 + payload_len + 32;
    if bytes.len() != expected {
        return Err(SnapshotError::Corrupted(format!(
            "expected {expected} bytes for a {n}x{n} field, found {}",
            bytes.len()
        )));
    }
    let (body, checksum) = bytes.split_at(28 + payload_len);
    let digest = Sha256::digest(body);
    if digest.as_slice() != checksum {
        return Err(SnapshotError::Corrupted("checksum mismatch".into()));
    }
    let grid = Grid2D::new(n, half_width)?;
    let mut data = Vec::with_capacity(n * n);
    for chunk in body[28..].chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let field = Field2D::from_vec(grid, data)?;
    Ok(Snapshot { field, time, scheme_tag })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field() -> Field2D {
        let grid = Grid2D::new(32, 4.0).unwrap();
        Field2D::from_fn(grid, |x, y| (x * 1.3).sin() + y * y)
    }

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.snap");
        let field = sample_field();
        snapshot_save(&path, &field, 3.25, 1).unwrap();
        let loaded = snapshot_load(&path).unwrap();
        assert_eq!(loaded.field, field);
        assert_eq!(loaded.time, 3.25);
        assert_eq!(loaded.scheme_tag, 1);
    }

    #[test]
    fn truncated_file_is_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.snap");
        snapshot_save(&path, &sample_field(), 0.0, 0).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        assert!(matches!(snapshot_load(&path), Err(SnapshotError::Corrupted(_))));
    }

    #[test]
    fn flipped_payload_byte_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.snap");
        snapshot_save(&path, &sample_field(), 0.0, 0).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(snapshot_load(&path), Err(SnapshotError::Corrupted(_))));
    }

    #[test]
    fn version_mismatch_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.snap");
        snapshot_save(&path, &sample_field(), 0.0, 0).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = 9;
        // keep the checksum consistent so only the version differs
        let body_len = bytes.len() - 32;
        let digest = Sha256::digest(&bytes[..body_len]);
        let len = bytes.len();
        bytes[len - 32..].copy_from_slice(&digest);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(snapshot_load(&path), Err(SnapshotError::Version { found: 9, .. })));
    }
}
