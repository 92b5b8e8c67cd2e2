//! Visual quality and identity metrics.

pub mod frechet;
pub mod identity;
pub mod landmarks;
pub mod ssim;

pub use frechet::{fit_gaussian, fit_gaussian_pooled, frechet_distance, FrechetError, FrechetScore, GaussianFit};
pub use identity::{csim, csim_tracks, IdentityError};
pub use landmarks::{lmd, LmdError, LmdOptions, LmdScore};
pub use ssim::{psnr, ssim, QualityError, Region, SsimParams, PSNR_CAP_DB};
