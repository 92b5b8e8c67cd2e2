//! `EMBT` binary embedding tracks.
//!
//! All integers little-endian, header fields in this order (21 bytes):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "EMBT"
//!      4     4  version, u32 = 1
//!      8     1  kind code, u8: 1 visual_sync, 2 audio_sync, 3 identity, 4 distribution
//!      9     4  dim, u32 >= 1
//!     13     4  count, u32
//!     17     4  rate_fps_milli, u32 (frames per second × 1000)
//!     21     …  count × dim IEEE-754 binary32 values, row-major
//! ```
//!
//! The file length must be exactly `21 + 4 * count * dim`.

use std::fs;
use std::io;
use std::path::Path;

use crate::model::{EmbeddingTrack, TrackKind};

pub const MAGIC: [u8; 4] = *b"EMBT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 21;

#[derive(Debug, thiserror::Error)]
pub enum EmbtError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("bad magic {0:?}, expected \"EMBT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}, expected {VERSION}")]
    Version(u32),
    #[error("unknown track kind code {0}")]
    UnknownKind(u8),
    #[error("expected a {expected} track, file holds {found}")]
    KindMismatch { expected: TrackKind, found: TrackKind },
    #[error("dim must be at least 1")]
    ZeroDim,
    #[error("header is {0} bytes, need {HEADER_LEN}")]
    ShortHeader(usize),
    #[error("payload size mismatch: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },
    #[error("track has {0} rows or dim beyond the u32 header range")]
    TooLarge(usize),
}

/// Encodes a track into the byte-exact file layout.
pub fn encode(track: &EmbeddingTrack<f32>) -> Result<Vec<u8>, EmbtError> {
    let dim = u32::try_from(track.dim()).map_err(|_| EmbtError::TooLarge(track.dim()))?;
    let count = u32::try_from(track.count()).map_err(|_| EmbtError::TooLarge(track.count()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * track.data().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(track.kind().code());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&track.rate_milli().to_le_bytes());
    for v in track.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingTrack<f32>, EmbtError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(EmbtError::BadMagic(bytes[..4].try_into().unwrap()));
        }
        return Err(EmbtError::ShortHeader(bytes.len()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(EmbtError::BadMagic(magic));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(EmbtError::Version(version));
    }
    let kind = TrackKind::from_code(bytes[8]).ok_or(EmbtError::UnknownKind(bytes[8]))?;
    let dim = u32_at(bytes, 9) as usize;
    if dim == 0 {
        return Err(EmbtError::ZeroDim);
    }
    let count = u32_at(bytes, 13) as usize;
    let rate_milli = u32_at(bytes, 17);
    let expected = HEADER_LEN as u64 + 4 * count as u64 * dim as u64;
    if bytes.len() as u64 != expected {
        return Err(EmbtError::Truncated { expected, actual: bytes.len() as u64 });
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(EmbtError::NonFinite { row: pos / dim });
    }
    Ok(EmbeddingTrack::new(kind, dim, rate_milli, data).expect("validated above"))
}

pub fn write_embedding_track(track: &EmbeddingTrack<f32>, path: &Path) -> Result<(), EmbtError> {
    let bytes = encode(track)?;
    fs::write(path, bytes).map_err(|source| EmbtError::Io { path: path.display().to_string(), source })
}

pub fn read_embedding_track(path: &Path) -> Result<EmbeddingTrack<f32>, EmbtError> {
    let bytes = fs::read(path).map_err(|source| EmbtError::Io { path: path.display().to_string(), source })?;
    decode(&bytes)
}

/// Reads a track and requires a particular kind.
pub fn read_embedding_track_of(path: &Path, expected: TrackKind) -> Result<EmbeddingTrack<f32>, EmbtError> {
    let track = read_embedding_track(path)?;
    if track.kind() != expected {
        return Err(EmbtError::KindMismatch { expected, found: track.kind() });
    }
    Ok(track)
}
