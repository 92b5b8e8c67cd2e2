//! Text landmark files.
//!
//! ```text
//! LMK1
//! scheme ibug68
//! points 68
//! mouth 48-67
//! frame 0 x0 y0 x1 y1 ... x67 y67
//! frame 1 missing
//! ```
//!
//! The `mouth` line takes a comma-separated list of indices and inclusive
//! ranges; it may be omitted for 68-point files, which default to `48-67`.
//! Frame records are numbered consecutively from zero; `missing` marks a frame
//! where detection failed. `#` starts a comment line.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::model::{LandmarkTrack, TrackError, MOUTH_68};

pub const MAGIC_LINE: &str = "LMK1";

#[derive(Debug, thiserror::Error)]
pub enum LandmarkFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("empty landmark file")]
    Empty,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("frame {frame} has {found} points, expected {expected}")]
    PointCount { frame: usize, found: usize, expected: usize },
    #[error("frame {frame} has a non-finite coordinate")]
    NonFinite { frame: usize },
    #[error(transparent)]
    Track(#[from] TrackError),
}

fn syntax(line: usize, message: impl Into<String>) -> LandmarkFileError {
    LandmarkFileError::Syntax { line, message: message.into() }
}

fn parse_indices(text: &str, line: usize) -> Result<Vec<usize>, LandmarkFileError> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || syntax(line, format!("bad mouth index {part:?}"));
        if let Some((a, b)) = part.split_once('-') {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

pub fn parse_landmarks(text: &str) -> Result<LandmarkTrack<f32>, LandmarkFileError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let Some((n, first)) = lines.next() else {
        return Err(LandmarkFileError::Empty);
    };
    if first != MAGIC_LINE {
        return Err(syntax(n, format!("expected {MAGIC_LINE:?}")));
    }
    let mut scheme = None;
    let mut points = None;
    let mut mouth = None;
    let mut frames = Vec::new();
    for (n, line) in lines {
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match key {
            "scheme" if frames.is_empty() => scheme = Some(rest.to_string()),
            "points" if frames.is_empty() => {
                points = Some(rest.parse::<usize>().map_err(|_| syntax(n, "bad point count"))?);
            }
            "mouth" if frames.is_empty() => mouth = Some(parse_indices(rest, n)?),
            "frame" => {
                let expected = points.ok_or_else(|| syntax(n, "frame before points header"))?;
                let mut fields = rest.split_whitespace();
                let index: usize = fields
                    .next()
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| syntax(n, "missing frame index"))?;
                if index != frames.len() {
                    return Err(syntax(n, format!("frame {index} out of order, expected {}", frames.len())));
                }
                let values: Vec<&str> = fields.collect();
                if values == ["missing"] {
                    frames.push(None);
                    continue;
                }
                if !values.len().is_multiple_of(2) || values.len() / 2 != expected {
                    return Err(LandmarkFileError::PointCount { frame: index, found: values.len() / 2, expected });
                }
                let coords: Vec<f32> = values
                    .iter()
                    .map(|v| v.parse::<f32>().map_err(|_| syntax(n, format!("bad coordinate {v:?}"))))
                    .collect::<Result<_, _>>()?;
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(LandmarkFileError::NonFinite { frame: index });
                }
                frames.push(Some(coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect()));
            }
            other => return Err(syntax(n, format!("unexpected record {other:?}"))),
        }
    }
    let points = points.ok_or(LandmarkFileError::Syntax { line: 1, message: "missing points header".into() })?;
    let scheme = scheme.unwrap_or_else(|| format!("{points}pt"));
    let mouth = match mouth {
        Some(m) => m,
        None if points == 68 => MOUTH_68.collect(),
        None => return Err(syntax(1, "mouth indices are required unless points = 68")),
    };
    Ok(LandmarkTrack::new(scheme, points, mouth, frames)?)
}

pub fn read_landmark_track(path: &Path) -> Result<LandmarkTrack<f32>, LandmarkFileError> {
    let text = fs::read_to_string(path).map_err(|source| LandmarkFileError::Io { path: path.display().to_string(), source })?;
    parse_landmarks(&text)
}

fn format_indices(indices: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < indices.len() {
        let start = indices[i];
        let mut end = start;
        while i + 1 < indices.len() && indices[i + 1] == end + 1 {
            end += 1;
            i += 1;
        }
        parts.push(if end > start { format!("{start}-{end}") } else { start.to_string() });
        i += 1;
    }
    parts.join(",")
}

pub fn format_landmarks(track: &LandmarkTrack<f32>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC_LINE}");
    let _ = writeln!(out, "scheme {}", track.scheme());
    let _ = writeln!(out, "points {}", track.points_per_frame());
    let _ = writeln!(out, "mouth {}", format_indices(track.mouth_indices()));
    for (i, frame) in track.frames().iter().enumerate() {
        match frame {
            None => {
                let _ = writeln!(out, "frame {i} missing");
            }
            Some(points) => {
                let _ = write!(out, "frame {i}");
                for p in points {
                    let _ = write!(out, " {} {}", p[0], p[1]);
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_landmark_track(track: &LandmarkTrack<f32>, path: &Path) -> Result<(), LandmarkFileError> {
    fs::write(path, format_landmarks(track)).map_err(|source| LandmarkFileError::Io { path: path.display().to_string(), source })
}
