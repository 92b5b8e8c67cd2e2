//! Lip-sync scores from paired audio/visual sync embeddings.
//!
//! Confidence and distance follow the offset-scan convention of the common
//! SyncNet evaluation tooling: for every offset `o` in `[-W, W]` take the mean
//! Euclidean distance between visual row `t` and audio row `t + o` over the
//! positions where both exist. `LSE-D` is the smallest mean distance and
//! `LSE-C` is the median minus the minimum. Silent-input variants apply the
//! same scan to a silent-input generation against the clip's original audio.
//!
//! The discrepancy score contrasts matched and mismatched audio under one
//! reference strategy: `0.5 * (|C_am - C_xm| + |D_am - D_xm|)`.

use num_rational::Ratio;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::model::{EmbeddingTrack, TrackKind};
use crate::scalar::{median, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SyncError {
    #[error("expected a {expected} track, got {found}")]
    WrongKind { expected: TrackKind, found: TrackKind },
    #[error("visual dim {visual} differs from audio dim {audio}")]
    DimMismatch { visual: usize, audio: usize },
    #[error("visual rate {visual} fps differs from audio rate {audio} fps")]
    RateMismatch { visual: f64, audio: f64 },
    #[error("tracks of {visual} and {audio} rows are too short for max offset {max_offset} (need more than {need})")]
    TooShort { visual: usize, audio: usize, max_offset: usize, need: usize },
    #[error("max offset must be at least 1")]
    ZeroOffset,
    #[error("discrepancy input {0} is not finite")]
    NonFinite(&'static str),
    #[error("discrepancy input {0} is negative")]
    Negative(&'static str),
}

/// Mean audio/visual distance at every offset in `[-W, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OffsetProfile<T> {
    max_offset: usize,
    distances: Vec<T>,
}

impl<T: Real> OffsetProfile<T> {
    /// Builds a profile from `2W + 1` finite, non-negative distances.
    pub fn new(distances: Vec<T>) -> Option<Self> {
        if distances.len() < 3 || distances.len().is_multiple_of(2) || distances.iter().any(|d| !d.is_finite() || *d < T::zero()) {
            return None;
        }
        Some(Self { max_offset: distances.len() / 2, distances })
    }

    pub fn max_offset(&self) -> usize {
        self.max_offset
    }

    /// Distances indexed from offset `-W` to `+W`.
    pub fn distances(&self) -> &[T] {
        &self.distances
    }

    pub fn at(&self, offset: isize) -> T {
        self.distances[(offset + self.max_offset as isize) as usize]
    }

    /// Offset of the smallest distance; the earliest one wins ties.
    pub fn argmin(&self) -> isize {
        let mut best = 0;
        for (i, d) in self.distances.iter().enumerate() {
            if *d < self.distances[best] {
                best = i;
            }
        }
        best as isize - self.max_offset as isize
    }

    pub fn min(&self) -> T {
        self.distances.iter().copied().fold(T::infinity(), T::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncScores<T> {
    /// Confidence; higher means better sync.
    pub lse_c: T,
    /// Distance; lower means better sync.
    pub lse_d: T,
}

fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x - *y;
            d * d
        })
        .sum::<T>()
        .sqrt()
}

pub fn offset_distance_profile<T: Real>(
    visual: &EmbeddingTrack<T>,
    audio: &EmbeddingTrack<T>,
    max_offset: usize,
) -> Result<OffsetProfile<T>, SyncError> {
    if visual.kind() != TrackKind::VisualSync {
        return Err(SyncError::WrongKind { expected: TrackKind::VisualSync, found: visual.kind() });
    }
    if audio.kind() != TrackKind::AudioSync {
        return Err(SyncError::WrongKind { expected: TrackKind::AudioSync, found: audio.kind() });
    }
    if visual.dim() != audio.dim() {
        return Err(SyncError::DimMismatch { visual: visual.dim(), audio: audio.dim() });
    }
    if visual.rate_milli() != audio.rate_milli() {
        return Err(SyncError::RateMismatch { visual: visual.rate_fps(), audio: audio.rate_fps() });
    }
    if max_offset == 0 {
        return Err(SyncError::ZeroOffset);
    }
    let (nv, na) = (visual.count(), audio.count());
    if nv.min(na) <= 2 * max_offset {
        return Err(SyncError::TooShort { visual: nv, audio: na, max_offset, need: 2 * max_offset });
    }
    let w = max_offset as isize;
    let distances = (-w..=w)
        .map(|o| {
            let lo = (-o).max(0) as usize;
            let hi = (nv as isize).min(na as isize - o) as usize;
            let total: T = (lo..hi)
                .map(|t| euclidean(visual.row(t), audio.row((t as isize + o) as usize)))
                .sum();
            total / T::from_usize_lossy(hi - lo)
        })
        .collect();
    Ok(OffsetProfile { max_offset, distances })
}

pub fn lse_from_profile<T: Real>(profile: &OffsetProfile<T>) -> SyncScores<T> {
    let min = profile.min();
    let med = median(profile.distances()).expect("profile is non-empty");
    SyncScores { lse_c: (med - min).max(T::zero()), lse_d: min }
}

/// Scores a visual track against an audio track in one step.
pub fn lse<T: Real>(visual: &EmbeddingTrack<T>, audio: &EmbeddingTrack<T>, max_offset: usize) -> Result<SyncScores<T>, SyncError> {
    offset_distance_profile(visual, audio, max_offset).map(|p| lse_from_profile(&p))
}

/// Silent-input scores: the silent generation's visual track against the
/// clip's original audio. High confidence here means the lips moved in sync
/// with speech the model never heard.
pub fn lse_silent<T: Real>(
    si_visual: &EmbeddingTrack<T>,
    original_audio: &EmbeddingTrack<T>,
    max_offset: usize,
) -> Result<SyncScores<T>, SyncError> {
    lse(si_visual, original_audio, max_offset)
}

/// Scalars the discrepancy formula accepts: floats and exact rationals.
pub trait DiscrepancyScalar: Signed + Copy + PartialOrd {
    fn is_finite_value(&self) -> bool;
}

impl DiscrepancyScalar for f32 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl DiscrepancyScalar for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

macro_rules! exact_discrepancy {
    ($($int:ty),*) => {$(
        impl DiscrepancyScalar for Ratio<$int> {
            fn is_finite_value(&self) -> bool {
                true
            }
        }
    )*};
}
exact_discrepancy!(i32, i64, i128);

/// Matched and mismatched scores for one reference strategy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsdInputs<T> {
    pub c_am: T,
    pub c_xm: T,
    pub d_am: T,
    pub d_xm: T,
}

impl<T: Copy> LsdInputs<T> {
    pub fn from_scores(am: SyncScores<T>, xm: SyncScores<T>) -> Self {
        Self { c_am: am.lse_c, c_xm: xm.lse_c, d_am: am.lse_d, d_xm: xm.lse_d }
    }
}

/// Lip-sync discrepancy `0.5 * (|c_am - c_xm| + |d_am - d_xm|)`; zero exactly
/// when matched and mismatched scores coincide.
pub fn lsd<T: DiscrepancyScalar>(inputs: &LsdInputs<T>) -> Result<T, SyncError> {
    let fields = [
        ("c_am", inputs.c_am),
        ("c_xm", inputs.c_xm),
        ("d_am", inputs.d_am),
        ("d_xm", inputs.d_xm),
    ];
    for (name, v) in fields {
        if !v.is_finite_value() {
            return Err(SyncError::NonFinite(name));
        }
        if v.is_negative() {
            return Err(SyncError::Negative(name));
        }
    }
    let half = T::one() / (T::one() + T::one());
    Ok(half * ((inputs.c_am - inputs.c_xm).abs() + (inputs.d_am - inputs.d_xm).abs()))
}
