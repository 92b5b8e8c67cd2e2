//! Crate-wide error wrapping each module's error type.

use crate::adapter::AdapterError;
use crate::embt::EmbtError;
use crate::frames::FrameError;
use crate::landmark_file::LandmarkFileError;
use crate::manifest::ManifestError;
use crate::model::TrackError;
use crate::report::ReportError;
use crate::setups::SetupError;
use crate::sync::SyncError;
use crate::visual::{FrechetError, IdentityError, LmdError, QualityError};
use crate::wav::WavError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Frechet(#[from] FrechetError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Lmd(#[from] LmdError),
    #[error(transparent)]
    Embt(#[from] EmbtError),
    #[error(transparent)]
    Landmarks(#[from] LandmarkFileError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Frames(#[from] FrameError),
    #[error(transparent)]
    Wav(#[from] WavError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
