//! Evaluation harness for lip leakage from identity reference images in
//! inpainting-based talking-face generation.
//!
//! The crate builds the experiment grid (audio-matched, audio-mismatched and
//! silent-input generation, each under current-frame and alternative identity
//! references), drives external generator/extractor processes through a small
//! file-based contract, and scores the results:
//!
//! - lip-sync confidence/distance (`LSE-C`/`LSE-D`) from an offset scan over
//!   paired audio/visual sync embeddings, their silent-input variants, and the
//!   lip-sync discrepancy between matched and mismatched audio;
//! - SSIM, PSNR, Fréchet distance over distribution embeddings, identity cosine
//!   similarity and mouth landmark distance.
//!
//! Numeric routines are generic over [`Real`] (`f32`/`f64`); the discrepancy
//! formula also accepts exact rationals. Frame rates are exact rationals
//! ([`Fps`]). Concrete aliases for the common instantiations live at the crate
//! root.

pub mod adapter;
pub mod embt;
pub mod error;
pub mod frames;
pub mod landmark_file;
pub mod manifest;
pub mod model;
pub mod prng;
pub mod report;
pub mod scalar;
pub mod setups;
pub mod sync;
pub mod visual;
pub mod wav;

pub use error::{Error, Result};
pub use model::{
    ArDetail, ClipEntry, ClipManifest, EmbeddingTrack, GenerationJob, LandmarkTrack, MetricKey,
    MetricRecord, ReferenceStrategy, SetupKind, TrackKind,
};
pub use scalar::Real;

/// Frames per second as an exact rational (e.g. `30000/1001`).
pub type Fps = num_rational::Rational64;

/// Embedding track as stored on disk.
pub type Track32 = model::EmbeddingTrack<f32>;
/// Embedding track promoted to double precision for scoring.
pub type Track64 = model::EmbeddingTrack<f64>;
pub type Landmarks32 = model::LandmarkTrack<f32>;
pub type Landmarks64 = model::LandmarkTrack<f64>;

pub type SyncScores64 = sync::SyncScores<f64>;
pub type SyncScores32 = sync::SyncScores<f32>;
pub type OffsetProfile64 = sync::OffsetProfile<f64>;
pub type OffsetProfile32 = sync::OffsetProfile<f32>;
pub type LsdInputs64 = sync::LsdInputs<f64>;
/// Discrepancy inputs in exact rational arithmetic.
pub type LsdInputsExact = sync::LsdInputs<num_rational::Rational64>;

pub type GaussianFit64 = visual::frechet::GaussianFit<f64>;
pub type GaussianFit32 = visual::frechet::GaussianFit<f32>;
pub type SsimParams64 = visual::ssim::SsimParams<f64>;
pub type SsimParams32 = visual::ssim::SsimParams<f32>;

/// Default maximum audio/visual offset scanned by the sync metrics, in frames.
pub const DEFAULT_MAX_OFFSET: usize = 15;
