//! Mouth landmark distance: mean per-point L1 error in pixels.

use serde::{Deserialize, Serialize};

use crate::model::LandmarkTrack;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LmdError {
    #[error("landmark schemes differ: {0:?} vs {1:?}")]
    SchemeMismatch(String, String),
    #[error("frame counts differ: {0} vs {1}")]
    CountMismatch(usize, usize),
    #[error("mouth index sets differ")]
    MouthMismatch,
    #[error("no mouth points selected")]
    NoMouthPoints,
    #[error("no frame has landmarks in both tracks")]
    NoUsableFrames,
    #[error("eye index {0} outside the landmark scheme")]
    EyeIndex(usize),
    #[error("zero inter-ocular distance in ground-truth frame {0}")]
    DegenerateEyes(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmdOptions {
    /// Divide each frame's error by the ground-truth inter-ocular distance.
    pub normalize: bool,
    /// Outer eye corners used for normalization (36 and 45 in the 68-point scheme).
    pub eye_indices: (usize, usize),
}

impl Default for LmdOptions {
    fn default() -> Self {
        Self { normalize: false, eye_indices: (36, 45) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmdScore<T> {
    pub distance: T,
    pub frames_used: usize,
    /// Frames dropped because either track has no detection there.
    pub frames_excluded: usize,
}

pub fn lmd<T: Real>(gen: &LandmarkTrack<T>, gt: &LandmarkTrack<T>, options: &LmdOptions) -> Result<LmdScore<T>, LmdError> {
    if gen.scheme() != gt.scheme() {
        return Err(LmdError::SchemeMismatch(gen.scheme().into(), gt.scheme().into()));
    }
    if gen.frame_count() != gt.frame_count() {
        return Err(LmdError::CountMismatch(gen.frame_count(), gt.frame_count()));
    }
    if gen.mouth_indices() != gt.mouth_indices() {
        return Err(LmdError::MouthMismatch);
    }
    let mouth = gt.mouth_indices();
    if mouth.is_empty() {
        return Err(LmdError::NoMouthPoints);
    }
    if options.normalize {
        let (l, r) = options.eye_indices;
        for i in [l, r] {
            if i >= gt.points_per_frame() {
                return Err(LmdError::EyeIndex(i));
            }
        }
    }
    let mut total = T::zero();
    let mut used = 0;
    let mut excluded = 0;
    for (f, (g, t)) in gen.frames().iter().zip(gt.frames()).enumerate() {
        let (Some(g), Some(t)) = (g, t) else {
            excluded += 1;
            continue;
        };
        let frame_err: T = mouth
            .iter()
            .map(|&i| (g[i][0] - t[i][0]).abs() + (g[i][1] - t[i][1]).abs())
            .sum::<T>()
            / T::from_usize_lossy(mouth.len());
        let scale = if options.normalize {
            let (l, r) = options.eye_indices;
            let d = ((t[l][0] - t[r][0]).powi(2) + (t[l][1] - t[r][1]).powi(2)).sqrt();
            if d == T::zero() {
                return Err(LmdError::DegenerateEyes(f));
            }
            d
        } else {
            T::one()
        };
        total += frame_err / scale;
        used += 1;
    }
    if used == 0 {
        return Err(LmdError::NoUsableFrames);
    }
    Ok(LmdScore { distance: total / T::from_usize_lossy(used), frames_used: used, frames_excluded: excluded })
}
