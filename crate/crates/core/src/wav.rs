//! Minimal RIFF/WAVE support: mono 16-bit little-endian PCM only.
//!
//! Files written here use the canonical 44-byte header:
//!
//! ```text
//! offset  size  field
//!      0     4  "RIFF"
//!      4     4  36 + data_len (u32 LE)
//!      8     4  "WAVE"
//!     12     4  "fmt "
//!     16     4  16 (u32 LE)
//!     20     2  1 = PCM (u16 LE)
//!     22     2  1 channel
//!     24     4  sample_rate
//!     28     4  sample_rate * 2 (byte rate)
//!     30     2  2 (block align)
//!     34     2  16 (bits per sample)
//!     36     4  "data"
//!     40     4  data_len = 2 * samples
//!     44     …  samples, i16 LE
//! ```
//!
//! The reader walks chunks and skips anything it does not need (`LIST`, `fact`, ...).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("not a RIFF/WAVE file")]
    NotRiff,
    #[error("missing {0} chunk")]
    MissingChunk(&'static str),
    #[error("unsupported encoding: format tag {format_tag}, {bits} bits per sample (need 16-bit PCM)")]
    Unsupported { format_tag: u16, bits: u16 },
    #[error("audio has {0} channels, only mono is accepted")]
    MultiChannel(u16),
    #[error("truncated chunk {0}")]
    Truncated(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub samples: u64,
}

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn io_err(path: &Path, source: io::Error) -> WavError {
    WavError::Io { path: path.display().to_string(), source }
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Parses a WAV byte buffer, returning its info and the data chunk bytes.
fn parse(bytes: &[u8]) -> Result<(WavInfo, &[u8]), WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::NotRiff);
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = le_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(len);
        match id {
            b"fmt " => {
                if len < 16 || body_end > bytes.len() {
                    return Err(WavError::Truncated("fmt"));
                }
                let b = &bytes[body_start..body_end];
                let mut tag = le_u16(&b[0..2]);
                if tag == FORMAT_EXTENSIBLE && len >= 40 {
                    // Sub-format GUID starts with the short format tag.
                    tag = le_u16(&b[24..26]);
                }
                fmt = Some((tag, le_u16(&b[2..4]), le_u32(&b[4..8]), le_u16(&b[14..16])));
            }
            b"data" => {
                if body_end > bytes.len() {
                    return Err(WavError::Truncated("data"));
                }
                data = Some(&bytes[body_start..body_end]);
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_end.saturating_add(len & 1);
    }
    let (format_tag, channels, sample_rate, bits) = fmt.ok_or(WavError::MissingChunk("fmt"))?;
    if format_tag != FORMAT_PCM || bits != 16 {
        return Err(WavError::Unsupported { format_tag, bits });
    }
    if channels != 1 {
        return Err(WavError::MultiChannel(channels));
    }
    let data = data.ok_or(WavError::MissingChunk("data"))?;
    Ok((WavInfo { sample_rate, samples: (data.len() / 2) as u64 }, data))
}

pub fn read_info(path: &Path) -> Result<WavInfo, WavError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    parse(&bytes).map(|(info, _)| info)
}

/// Reads every sample of a mono 16-bit file.
pub fn read_samples(path: &Path) -> Result<(WavInfo, Vec<i16>), WavError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let (info, data) = parse(&bytes)?;
    let samples = data.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
    Ok((info, samples))
}

/// Serializes samples into the canonical 44-byte-header layout.
pub fn encode_mono16(sample_rate: u32, samples: &[i16]) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn write_mono16(path: &Path, sample_rate: u32, samples: &[i16]) -> Result<(), WavError> {
    let bytes = encode_mono16(sample_rate, samples);
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&bytes).map_err(|e| io_err(path, e))
}
