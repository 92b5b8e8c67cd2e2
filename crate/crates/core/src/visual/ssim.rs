//! Structural similarity and peak signal-to-noise ratio on 8-bit RGB frames.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// PSNR reported for identical frames.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QualityError {
    #[error("frame sizes differ: {a:?} vs {b:?}")]
    SizeMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("frame {size:?} is smaller than the {window}x{window} window")]
    TooSmall { size: (u32, u32), window: usize },
    #[error("invalid SSIM parameters: {0}")]
    BadParams(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams<T> {
    /// Side of the square Gaussian window; odd and at least 3.
    pub window: usize,
    pub sigma: T,
    pub k1: T,
    pub k2: T,
    pub dynamic_range: T,
}

impl<T: Real> Default for SsimParams<T> {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: T::lit(1.5),
            k1: T::lit(0.01),
            k2: T::lit(0.03),
            dynamic_range: T::lit(255.0),
        }
    }
}

impl<T: Real> SsimParams<T> {
    pub fn validate(&self) -> Result<(), QualityError> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(QualityError::BadParams("window must be odd and >= 3"));
        }
        if !(self.k1 > T::zero() && self.k2 > T::zero()) {
            return Err(QualityError::BadParams("k1 and k2 must be positive"));
        }
        if !(self.sigma > T::zero() && self.dynamic_range > T::zero()) {
            return Err(QualityError::BadParams("sigma and dynamic range must be positive"));
        }
        Ok(())
    }

    /// Normalized 1-D Gaussian taps.
    pub fn kernel(&self) -> Vec<T> {
        let r = (self.window / 2) as isize;
        let two_s2 = T::lit(2.0) * self.sigma * self.sigma;
        let taps: Vec<T> = (-r..=r)
            .map(|i| {
                let x = T::from_isize(i).unwrap();
                (-(x * x) / two_s2).exp()
            })
            .collect();
        let total: T = taps.iter().copied().sum();
        taps.into_iter().map(|t| t / total).collect()
    }
}

/// Which part of the frame quality metrics look at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    #[default]
    Full,
    /// Rows from `height / 2` down, where inpainting happens.
    LowerHalf,
}

impl Region {
    pub fn apply(self, frame: &RgbImage) -> RgbImage {
        match self {
            Region::Full => frame.clone(),
            Region::LowerHalf => {
                let (w, h) = frame.dimensions();
                image::imageops::crop_imm(frame, 0, h / 2, w, h - h / 2).to_image()
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Full => "full",
            Region::LowerHalf => "lower-half",
        }
    }
}

fn check_sizes(a: &RgbImage, b: &RgbImage) -> Result<(), QualityError> {
    if a.dimensions() != b.dimensions() {
        return Err(QualityError::SizeMismatch { a: a.dimensions(), b: b.dimensions() });
    }
    Ok(())
}

fn channel_plane<T: Real>(img: &RgbImage, c: usize) -> Vec<T> {
    img.pixels().map(|p| T::from_u8(p.0[c]).unwrap()).collect()
}

/// Separable "valid" correlation of a `w × h` plane with the kernel.
fn filter_valid<T: Real>(plane: &[T], w: usize, h: usize, kernel: &[T]) -> Vec<T> {
    let k = kernel.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut horiz = vec![T::zero(); ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = kernel.iter().zip(&row[x..x + k]).map(|(g, v)| *g * *v).sum();
        }
    }
    let mut out = vec![T::zero(); ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel.iter().enumerate().map(|(i, g)| *g * horiz[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over the valid window positions, averaged over R, G and B.
pub fn ssim<T: Real>(a: &RgbImage, b: &RgbImage, params: &SsimParams<T>) -> Result<T, QualityError> {
    check_sizes(a, b)?;
    params.validate()?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < params.window || h < params.window {
        return Err(QualityError::TooSmall { size: a.dimensions(), window: params.window });
    }
    let kernel = params.kernel();
    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let two = T::lit(2.0);
    let mut total = T::zero();
    for c in 0..3 {
        let x: Vec<T> = channel_plane(a, c);
        let y: Vec<T> = channel_plane(b, c);
        let xx: Vec<T> = x.iter().map(|v| *v * *v).collect();
        let yy: Vec<T> = y.iter().map(|v| *v * *v).collect();
        let xy: Vec<T> = x.iter().zip(&y).map(|(p, q)| *p * *q).collect();
        let mu_x = filter_valid(&x, w, h, &kernel);
        let mu_y = filter_valid(&y, w, h, &kernel);
        let e_xx = filter_valid(&xx, w, h, &kernel);
        let e_yy = filter_valid(&yy, w, h, &kernel);
        let e_xy = filter_valid(&xy, w, h, &kernel);
        let map: Vec<T> = (0..mu_x.len())
            .map(|i| {
                let (mx, my) = (mu_x[i], mu_y[i]);
                let var_x = e_xx[i] - mx * mx;
                let var_y = e_yy[i] - my * my;
                let cov = e_xy[i] - mx * my;
                ((two * mx * my + c1) * (two * cov + c2)) / ((mx * mx + my * my + c1) * (var_x + var_y + c2))
            })
            .collect();
        total += map.iter().copied().sum::<T>() / T::from_usize_lossy(map.len());
    }
    Ok(total / T::lit(3.0))
}

/// `10 log10(255² / MSE)` over all channels, capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Real>(a: &RgbImage, b: &RgbImage) -> Result<T, QualityError> {
    check_sizes(a, b)?;
    let sse: u64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(p, q)| {
            let d = i64::from(*p) - i64::from(*q);
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(T::lit(PSNR_CAP_DB));
    }
    let n = a.as_raw().len() as u64;
    // Integer numerator keeps analytic cases (0 dB, 30 dB) exact.
    let ratio = T::from_u64(255 * 255 * n).unwrap() / T::from_u64(sse).unwrap();
    Ok((T::lit(10.0) * ratio.log10()).min(T::lit(PSNR_CAP_DB)))
}
