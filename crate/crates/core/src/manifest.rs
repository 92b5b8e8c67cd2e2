//! Clip manifest ingestion and per-clip validation.
//!
//! A manifest is a JSON Lines file, one clip per line:
//!
//! ```text
//! {"clip_id":"c1","frame_dir":"frames/c1","audio_path":"audio/c1.wav","fps":"25","sample_rate":16000,"frame_count":50}
//! ```
//!
//! `fps` is an integer or a string `N`, `N/D` or short decimal. Relative paths
//! resolve against the manifest's directory. Blank lines and lines starting
//! with `#` are ignored.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::frames;
use crate::model::{ClipEntry, ClipManifest};
use crate::wav::{self, WavError};
use crate::Fps;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed manifest line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate clip_id {0:?}")]
    DuplicateId(String),
    #[error("clip {clip_id:?}: frame duration {frames_s:.6}s and audio duration {audio_s:.6}s differ by more than one frame period")]
    DurationMismatch { clip_id: String, frames_s: f64, audio_s: f64 },
    #[error("clip {clip_id:?} is invalid: {report}")]
    InvalidClip { clip_id: String, report: ValidationReport },
}

/// Machine-readable clip validation failure codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueCode {
    EmptyClipId,
    NonpositiveFps,
    NonpositiveSampleRate,
    ZeroFrameCount,
    FrameDirMissing,
    FrameCountMismatch,
    FrameUnreadable,
    FrameSizeMismatch,
    AudioUnreadable,
    AudioFormat,
    AudioMultichannel,
    SampleRateMismatch,
    DurationMismatch,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::EmptyClipId => "empty-clip-id",
            IssueCode::NonpositiveFps => "nonpositive-fps",
            IssueCode::NonpositiveSampleRate => "nonpositive-sample-rate",
            IssueCode::ZeroFrameCount => "zero-frame-count",
            IssueCode::FrameDirMissing => "frame-dir-missing",
            IssueCode::FrameCountMismatch => "frame-count-mismatch",
            IssueCode::FrameUnreadable => "frame-unreadable",
            IssueCode::FrameSizeMismatch => "frame-size-mismatch",
            IssueCode::AudioUnreadable => "audio-unreadable",
            IssueCode::AudioFormat => "audio-format",
            IssueCode::AudioMultichannel => "audio-multichannel",
            IssueCode::SampleRateMismatch => "sample-rate-mismatch",
            IssueCode::DurationMismatch => "duration-mismatch",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Issue {
    pub code: IssueCode,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub clip_id: String,
    pub issues: Vec<Issue>,
    /// Frame resolution when every frame agrees.
    pub frame_size: Option<(u32, u32)>,
    /// Durations in seconds, when both could be established.
    pub durations: Option<(f64, f64)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, code: IssueCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    fn push(&mut self, code: IssueCode, detail: impl Into<String>) {
        self.issues.push(Issue { code, detail: detail.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "{}: ok", self.clip_id);
        }
        let parts: Vec<String> = self.issues.iter().map(|i| format!("{} ({})", i.code.as_str(), i.detail)).collect();
        write!(f, "{}: {}", self.clip_id, parts.join("; "))
    }
}

fn to_f64(r: Fps) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Checks every clip invariant, collecting failures instead of stopping.
pub fn validate_clip(entry: &ClipEntry) -> ValidationReport {
    let mut report = ValidationReport { clip_id: entry.clip_id.clone(), ..Default::default() };
    if entry.clip_id.is_empty() {
        report.push(IssueCode::EmptyClipId, "clip_id is empty");
    }
    if *entry.fps.numer() <= 0 {
        report.push(IssueCode::NonpositiveFps, format!("fps = {}", crate::model::format_fps(&entry.fps)));
    }
    if entry.sample_rate == 0 {
        report.push(IssueCode::NonpositiveSampleRate, "sample_rate = 0");
    }
    if entry.frame_count == 0 {
        report.push(IssueCode::ZeroFrameCount, "frame_count = 0");
    }

    match frames::list_frames(&entry.frame_dir) {
        Err(e) => report.push(IssueCode::FrameDirMissing, e.to_string()),
        Ok(files) => {
            if files.len() as u64 != entry.frame_count {
                report.push(
                    IssueCode::FrameCountMismatch,
                    format!("{} frame files, frame_count = {}", files.len(), entry.frame_count),
                );
            }
            let mut first: Option<(u32, u32)> = None;
            let mut consistent = true;
            for path in &files {
                match frames::frame_size(path) {
                    Err(e) => {
                        report.push(IssueCode::FrameUnreadable, e.to_string());
                        consistent = false;
                        break;
                    }
                    Ok(size) => match first {
                        None => first = Some(size),
                        Some(expected) if expected != size => {
                            report.push(
                                IssueCode::FrameSizeMismatch,
                                format!("{} is {:?}, first frame is {:?}", path.display(), size, expected),
                            );
                            consistent = false;
                            break;
                        }
                        Some(_) => {}
                    },
                }
            }
            if consistent {
                report.frame_size = first;
            }
        }
    }

    let audio = match wav::read_info(&entry.audio_path) {
        Ok(info) => Some(info),
        Err(WavError::MultiChannel(n)) => {
            report.push(IssueCode::AudioMultichannel, format!("{n} channels"));
            None
        }
        Err(e @ (WavError::Unsupported { .. } | WavError::NotRiff | WavError::MissingChunk(_) | WavError::Truncated(_))) => {
            report.push(IssueCode::AudioFormat, e.to_string());
            None
        }
        Err(e) => {
            report.push(IssueCode::AudioUnreadable, e.to_string());
            None
        }
    };

    if let Some(info) = audio {
        if info.sample_rate != entry.sample_rate {
            report.push(
                IssueCode::SampleRateMismatch,
                format!("file is {} Hz, manifest says {} Hz", info.sample_rate, entry.sample_rate),
            );
        }
        if let (Some(frames_s), true, true) = (entry.frame_duration(), info.sample_rate > 0, entry.frame_count > 0) {
            let audio_s = Fps::new(info.samples as i64, i64::from(info.sample_rate));
            let period = entry.fps.recip();
            let diff = if frames_s > audio_s { frames_s - audio_s } else { audio_s - frames_s };
            report.durations = Some((to_f64(frames_s), to_f64(audio_s)));
            if diff > period {
                report.push(
                    IssueCode::DurationMismatch,
                    format!("frames {:.6}s vs audio {:.6}s", to_f64(frames_s), to_f64(audio_s)),
                );
            }
        }
    }
    report
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parses a manifest and checks id uniqueness without touching clip files.
pub fn parse_manifest(path: &Path) -> Result<ClipManifest, ManifestError> {
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.display().to_string(), source })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = HashSet::new();
    let mut clips = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut entry: ClipEntry = serde_json::from_str(trimmed)
            .map_err(|e| ManifestError::Malformed { line: i + 1, message: e.to_string() })?;
        if !seen.insert(entry.clip_id.clone()) {
            return Err(ManifestError::DuplicateId(entry.clip_id));
        }
        entry.frame_dir = resolve(base, &entry.frame_dir);
        entry.audio_path = resolve(base, &entry.audio_path);
        clips.push(entry);
    }
    Ok(ClipManifest { clips })
}

/// Parses and fully validates a manifest.
pub fn load_manifest(path: &Path) -> Result<ClipManifest, ManifestError> {
    let manifest = parse_manifest(path)?;
    for clip in &manifest.clips {
        let report = validate_clip(clip);
        if report.is_valid() {
            continue;
        }
        if let (true, Some((frames_s, audio_s))) = (report.has(IssueCode::DurationMismatch), report.durations) {
            return Err(ManifestError::DurationMismatch { clip_id: clip.clip_id.clone(), frames_s, audio_s });
        }
        return Err(ManifestError::InvalidClip { clip_id: clip.clip_id.clone(), report });
    }
    Ok(manifest)
}

/// Serializes one manifest line in canonical field order.
pub fn manifest_line(entry: &ClipEntry) -> String {
    serde_json::to_string(entry).expect("clip entry serializes")
}
