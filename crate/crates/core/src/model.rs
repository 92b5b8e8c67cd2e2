//! Shared data model: clips, setups, reference strategies, tracks and records.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Real;
use crate::Fps;

/// One ground-truth clip: an ordered frame directory plus its audio track.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip_id: String,
    pub frame_dir: PathBuf,
    pub audio_path: PathBuf,
    #[serde(with = "fps_serde")]
    pub fps: Fps,
    pub sample_rate: u32,
    pub frame_count: u64,
}

impl ClipEntry {
    /// Video duration in seconds as an exact rational, `None` when fps is zero.
    pub fn frame_duration(&self) -> Option<Fps> {
        if *self.fps.numer() <= 0 {
            return None;
        }
        Some(Fps::from_integer(self.frame_count as i64) / self.fps)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClipManifest {
    pub clips: Vec<ClipEntry>,
}

impl ClipManifest {
    pub fn get(&self, clip_id: &str) -> Option<&ClipEntry> {
        self.clips.iter().find(|c| c.clip_id == clip_id)
    }

    pub fn clip_ids(&self) -> Vec<String> {
        self.clips.iter().map(|c| c.clip_id.clone()).collect()
    }
}

pub(crate) mod fps_serde {
    use super::*;

    pub fn serialize<S: Serializer>(fps: &Fps, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_fps(fps))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Fps, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Fps::from_integer(n)),
            Raw::Text(t) => parse_fps(&t).map_err(serde::de::Error::custom),
        }
    }
}

/// Formats a frame rate as `N` or `N/D`.
pub fn format_fps(fps: &Fps) -> String {
    if *fps.denom() == 1 {
        fps.numer().to_string()
    } else {
        format!("{}/{}", fps.numer(), fps.denom())
    }
}

/// Parses `25`, `30000/1001` or a short decimal like `29.97`.
pub fn parse_fps(text: &str) -> Result<Fps, String> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| format!("bad fps numerator in {text:?}"))?;
        let d: i64 = d.trim().parse().map_err(|_| format!("bad fps denominator in {text:?}"))?;
        if d == 0 {
            return Err(format!("zero fps denominator in {text:?}"));
        }
        return Ok(Fps::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        let digits = frac.len() as u32;
        if digits > 9 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(format!("bad fps {text:?}"));
        }
        let whole = format!("{int}{frac}");
        let n: i64 = whole.parse().map_err(|_| format!("bad fps {text:?}"))?;
        return Ok(Fps::new(n, 10i64.pow(digits)));
    }
    text.parse::<i64>()
        .map(Fps::from_integer)
        .map_err(|_| format!("bad fps {text:?}"))
}

/// Audio condition a video is generated under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetupKind {
    /// Driven by the clip's own audio.
    #[serde(rename = "AM")]
    AudioMatched,
    /// Driven by another clip's audio.
    #[serde(rename = "XM")]
    AudioMismatched,
    /// Driven by digital silence.
    #[serde(rename = "SI")]
    SilentInput,
}

impl SetupKind {
    pub const ALL: [SetupKind; 3] = [
        SetupKind::AudioMatched,
        SetupKind::AudioMismatched,
        SetupKind::SilentInput,
    ];

    pub fn code(self) -> &'static str {
        match self {
            SetupKind::AudioMatched => "AM",
            SetupKind::AudioMismatched => "XM",
            SetupKind::SilentInput => "SI",
        }
    }
}

impl fmt::Display for SetupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SetupKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "AM" => Ok(SetupKind::AudioMatched),
            "XM" => Ok(SetupKind::AudioMismatched),
            "SI" => Ok(SetupKind::SilentInput),
            other => Err(format!("unknown setup {other:?}")),
        }
    }
}

/// How an alternative identity reference is chosen.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArDetail {
    #[default]
    FirstFrame,
    RandomFrame,
    /// `k >= 2` reference frames.
    MultiFrame(u32),
    Custom(String),
}

impl ArDetail {
    pub fn multi_frame(k: u32) -> Result<Self, String> {
        if k < 2 {
            return Err(format!("multi_frame needs at least 2 references, got {k}"));
        }
        Ok(ArDetail::MultiFrame(k))
    }

    pub fn is_valid(&self) -> bool {
        match self {
            ArDetail::MultiFrame(k) => *k >= 2,
            ArDetail::Custom(label) => !label.is_empty(),
            _ => true,
        }
    }
}

impl fmt::Display for ArDetail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArDetail::FirstFrame => f.write_str("first_frame"),
            ArDetail::RandomFrame => f.write_str("random_frame"),
            ArDetail::MultiFrame(k) => write!(f, "multi_frame:{k}"),
            ArDetail::Custom(label) => write!(f, "custom:{label}"),
        }
    }
}

impl FromStr for ArDetail {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "first_frame" => return Ok(ArDetail::FirstFrame),
            "random_frame" => return Ok(ArDetail::RandomFrame),
            _ => {}
        }
        if let Some(k) = s.strip_prefix("multi_frame:") {
            let k: u32 = k.parse().map_err(|_| format!("bad multi_frame count in {s:?}"))?;
            return ArDetail::multi_frame(k);
        }
        if let Some(label) = s.strip_prefix("custom:") {
            if label.is_empty() {
                return Err("custom reference strategy needs a label".into());
            }
            return Ok(ArDetail::Custom(label.to_string()));
        }
        Err(format!("unknown alternative reference strategy {s:?}"))
    }
}

/// Identity reference selection for one generation job.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReferenceStrategy {
    /// Reference is the masked input frame itself.
    Current,
    Alternative(ArDetail),
}

/// The two reference columns reported side by side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RefKind {
    #[serde(rename = "AR")]
    Alternative,
    #[serde(rename = "CR")]
    Current,
}

impl RefKind {
    /// Display order used by every table: AR first, then CR.
    pub const ALL: [RefKind; 2] = [RefKind::Alternative, RefKind::Current];

    pub fn code(self) -> &'static str {
        match self {
            RefKind::Alternative => "AR",
            RefKind::Current => "CR",
        }
    }
}

impl fmt::Display for RefKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for RefKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "AR" => Ok(RefKind::Alternative),
            "CR" => Ok(RefKind::Current),
            other => Err(format!("unknown reference kind {other:?}")),
        }
    }
}

impl ReferenceStrategy {
    pub fn kind(&self) -> RefKind {
        match self {
            ReferenceStrategy::Current => RefKind::Current,
            ReferenceStrategy::Alternative(_) => RefKind::Alternative,
        }
    }
}

impl fmt::Display for ReferenceStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceStrategy::Current => f.write_str("CR"),
            ReferenceStrategy::Alternative(detail) => write!(f, "AR:{detail}"),
        }
    }
}

impl FromStr for ReferenceStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "CR" {
            return Ok(ReferenceStrategy::Current);
        }
        match s.strip_prefix("AR:") {
            Some(detail) => Ok(ReferenceStrategy::Alternative(detail.parse()?)),
            None => Err(format!("unknown reference strategy {s:?}")),
        }
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}
string_serde!(ArDetail);
string_serde!(ReferenceStrategy);

/// One generation run: a method applied to a clip under a setup and reference.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub method_name: String,
    pub clip_id: String,
    pub setup: SetupKind,
    pub reference: ReferenceStrategy,
    /// Source frames of the clip being re-synthesized.
    pub input_frames: PathBuf,
    pub driving_audio_path: PathBuf,
    /// Clip whose audio drives the job; `None` for synthesized silence.
    pub driving_audio_clip: Option<String>,
    pub output_dir: PathBuf,
    pub effective_frame_count: u64,
}

impl GenerationJob {
    pub fn job_id(&self) -> String {
        format!(
            "{}/{}/{}/{}",
            self.method_name,
            self.clip_id,
            self.setup,
            self.reference.kind()
        )
    }
}

/// Semantic role of an embedding track.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackKind {
    VisualSync,
    AudioSync,
    Identity,
    Distribution,
}

impl TrackKind {
    pub const ALL: [TrackKind; 4] = [
        TrackKind::VisualSync,
        TrackKind::AudioSync,
        TrackKind::Identity,
        TrackKind::Distribution,
    ];

    /// Code stored in the binary track header.
    pub fn code(self) -> u8 {
        match self {
            TrackKind::VisualSync => 1,
            TrackKind::AudioSync => 2,
            TrackKind::Identity => 3,
            TrackKind::Distribution => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        TrackKind::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            TrackKind::VisualSync => "visual_sync",
            TrackKind::AudioSync => "audio_sync",
            TrackKind::Identity => "identity",
            TrackKind::Distribution => "distribution",
        }
    }
}

impl fmt::Display for TrackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrackError {
    #[error("embedding dimension must be at least 1")]
    ZeroDim,
    #[error("payload of {len} values is not a multiple of dim {dim}")]
    Ragged { len: usize, dim: usize },
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("landmark frame {frame} has {found} points, expected {expected}")]
    PointCount { frame: usize, found: usize, expected: usize },
    #[error("mouth index {index} outside 0..{points}")]
    MouthIndex { index: usize, points: usize },
    #[error("non-finite landmark coordinate in frame {frame}")]
    NonFiniteLandmark { frame: usize },
}

/// A `count × dim` row-major matrix of per-frame features.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTrack<T = f32> {
    kind: TrackKind,
    dim: usize,
    rate_milli: u32,
    data: Vec<T>,
}

impl<T: Real> EmbeddingTrack<T> {
    pub fn new(kind: TrackKind, dim: usize, rate_milli: u32, data: Vec<T>) -> Result<Self, TrackError> {
        if dim == 0 {
            return Err(TrackError::ZeroDim);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(TrackError::Ragged { len: data.len(), dim });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(TrackError::NonFinite { row: pos / dim });
        }
        Ok(Self { kind, dim, rate_milli, data })
    }

    pub fn from_rows(kind: TrackKind, rate_milli: u32, rows: &[Vec<T>]) -> Result<Self, TrackError> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(TrackError::Ragged { len: row.len(), dim });
            }
            data.extend_from_slice(row);
        }
        Self::new(kind, dim, rate_milli, data)
    }

    pub fn kind(&self) -> TrackKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Sampling rate in frames per second times 1000.
    pub fn rate_milli(&self) -> u32 {
        self.rate_milli
    }

    pub fn rate_fps(&self) -> f64 {
        f64::from(self.rate_milli) / 1000.0
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, index: usize) -> &[T] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    /// Keeps only the first `count` rows.
    pub fn truncated(&self, count: usize) -> Self {
        let keep = count.min(self.count()) * self.dim;
        Self { data: self.data[..keep].to_vec(), ..*self }
    }

    pub fn cast<U: Real>(&self) -> EmbeddingTrack<U> {
        EmbeddingTrack {
            kind: self.kind,
            dim: self.dim,
            rate_milli: self.rate_milli,
            data: self
                .data
                .iter()
                .map(|v| U::from(*v).expect("finite value converts"))
                .collect(),
        }
    }
}

/// Per-frame facial landmarks; `None` frames are detector misses.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkTrack<T = f32> {
    scheme: String,
    points_per_frame: usize,
    mouth_indices: Vec<usize>,
    frames: Vec<Option<Vec<[T; 2]>>>,
}

/// Mouth points of the common 68-point scheme.
pub const MOUTH_68: std::ops::Range<usize> = 48..68;

impl<T: Real> LandmarkTrack<T> {
    pub fn new(
        scheme: impl Into<String>,
        points_per_frame: usize,
        mouth_indices: Vec<usize>,
        frames: Vec<Option<Vec<[T; 2]>>>,
    ) -> Result<Self, TrackError> {
        if let Some(&index) = mouth_indices.iter().find(|&&i| i >= points_per_frame) {
            return Err(TrackError::MouthIndex { index, points: points_per_frame });
        }
        for (i, frame) in frames.iter().enumerate() {
            let Some(points) = frame else { continue };
            if points.len() != points_per_frame {
                return Err(TrackError::PointCount {
                    frame: i,
                    found: points.len(),
                    expected: points_per_frame,
                });
            }
            if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                return Err(TrackError::NonFiniteLandmark { frame: i });
            }
        }
        Ok(Self { scheme: scheme.into(), points_per_frame, mouth_indices, frames })
    }

    pub fn scheme(&self) -> &str {
        &self.scheme
    }

    pub fn points_per_frame(&self) -> usize {
        self.points_per_frame
    }

    pub fn mouth_indices(&self) -> &[usize] {
        &self.mouth_indices
    }

    pub fn frames(&self) -> &[Option<Vec<[T; 2]>>] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn with_mouth_indices(mut self, mouth_indices: Vec<usize>) -> Result<Self, TrackError> {
        if let Some(&index) = mouth_indices.iter().find(|&&i| i >= self.points_per_frame) {
            return Err(TrackError::MouthIndex { index, points: self.points_per_frame });
        }
        self.mouth_indices = mouth_indices;
        Ok(self)
    }

    /// Keeps only the first `count` frames.
    pub fn truncated(&self, count: usize) -> Self {
        Self { frames: self.frames[..count.min(self.frames.len())].to_vec(), ..self.clone() }
    }

    /// Applies `f` to every point of every detected frame.
    pub fn map_points(&self, mut f: impl FnMut([T; 2]) -> [T; 2]) -> Self {
        Self {
            frames: self
                .frames
                .iter()
                .map(|fr| fr.as_ref().map(|pts| pts.iter().map(|p| f(*p)).collect()))
                .collect(),
            ..self.clone()
        }
    }
}

/// Unique key of a metric value within one evaluation run.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetricKey {
    pub method_name: String,
    pub clip_id: String,
    pub setup: SetupKind,
    pub reference: ReferenceStrategy,
    pub metric_name: String,
}

/// Clip id used for corpus-level values such as the Fréchet distance.
pub const CORPUS_CLIP: &str = "*";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub method_name: String,
    pub clip_id: String,
    pub setup: SetupKind,
    pub reference: ReferenceStrategy,
    pub metric_name: String,
    pub value: f64,
}

impl MetricRecord {
    pub fn key(&self) -> MetricKey {
        MetricKey {
            method_name: self.method_name.clone(),
            clip_id: self.clip_id.clone(),
            setup: self.setup,
            reference: self.reference.clone(),
            metric_name: self.metric_name.clone(),
        }
    }
}
