//! Fréchet distance between Gaussian fits of feature distributions.
//!
//! `‖μ1 − μ2‖² + Tr(Σ1 + Σ2 − 2 (Σ1 Σ2)^½)`, with the trace of the cross term
//! taken through the symmetric form `Tr((Σ1^½ Σ2 Σ1^½)^½)` so every square
//! root is of a symmetric PSD matrix. Eigenvalues are clamped at zero. When a
//! covariance is near singular (smallest eigenvalue below `1e-10` times the
//! largest) both covariances receive `1e-6 · I` first.
//!
//! The eigen-decompositions run in `f64` regardless of the scalar type.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::model::{EmbeddingTrack, TrackKind};
use crate::scalar::Real;

pub const SYMMETRY_TOL: f64 = 1e-8;
pub const PSD_TOL: f64 = 1e-8;
pub const SINGULAR_RATIO: f64 = 1e-10;
pub const REGULARIZATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrechetError {
    #[error("expected a distribution track, got {0}")]
    WrongKind(TrackKind),
    #[error("need at least 2 samples to fit a covariance, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("covariance is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("covariance is not positive semi-definite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix square root failed after regularization")]
    SqrtFailed,
}

/// Mean vector and `d × d` row-major covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianFit<T> {
    pub mean: Vec<T>,
    pub cov: Vec<T>,
}

impl<T: Real> GaussianFit<T> {
    pub fn new(mean: Vec<T>, cov: Vec<T>) -> Result<Self, FrechetError> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(FrechetError::DimMismatch(d * d, cov.len()));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn cov_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_iterator(d, d, self.cov.iter().map(|v| v.to_f64_lossy()))
    }
}

/// Column means and unbiased covariance of the rows, symmetrized.
pub fn fit_gaussian<T: Real>(track: &EmbeddingTrack<T>) -> Result<GaussianFit<T>, FrechetError> {
    fit_gaussian_pooled(std::slice::from_ref(track))
}

/// Fits one Gaussian to the rows of several tracks taken together.
pub fn fit_gaussian_pooled<T: Real>(tracks: &[EmbeddingTrack<T>]) -> Result<GaussianFit<T>, FrechetError> {
    let Some(first) = tracks.first() else {
        return Err(FrechetError::TooFewSamples(0));
    };
    let d = first.dim();
    for t in tracks {
        if t.kind() != TrackKind::Distribution {
            return Err(FrechetError::WrongKind(t.kind()));
        }
        if t.dim() != d {
            return Err(FrechetError::DimMismatch(d, t.dim()));
        }
    }
    let n: usize = tracks.iter().map(|t| t.count()).sum();
    if n < 2 {
        return Err(FrechetError::TooFewSamples(n));
    }
    let mut mean = vec![T::zero(); d];
    for row in tracks.iter().flat_map(|t| t.rows()) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += *v;
        }
    }
    let nf = T::from_usize_lossy(n);
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut cov = vec![T::zero(); d * d];
    let mut centered = vec![T::zero(); d];
    for row in tracks.iter().flat_map(|t| t.rows()) {
        for (c, (v, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = *v - *m;
        }
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += centered[i] * centered[j];
            }
        }
    }
    let denom = T::from_usize_lossy(n - 1);
    let half = T::lit(0.5);
    let mut sym = vec![T::zero(); d * d];
    for i in 0..d {
        for j in 0..d {
            sym[i * d + j] = half * (cov[i * d + j] + cov[j * d + i]) / denom;
        }
    }
    Ok(GaussianFit { mean, cov: sym })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrechetScore<T> {
    pub distance: T,
    /// Whether `ε·I` was added to the covariances.
    pub regularized: bool,
}

fn check_covariance(cov: &DMatrix<f64>) -> Result<DVector<f64>, FrechetError> {
    let asym = (cov - cov.transpose()).abs().max();
    if asym > SYMMETRY_TOL {
        return Err(FrechetError::NotSymmetric(asym));
    }
    let eig = cov.clone().try_symmetric_eigen(f64::EPSILON, 0).ok_or(FrechetError::SqrtFailed)?;
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL {
        return Err(FrechetError::NotPsd(min));
    }
    Ok(eig.eigenvalues)
}

fn near_singular(eigenvalues: &DVector<f64>) -> bool {
    let max = eigenvalues.max();
    max <= 0.0 || eigenvalues.min() < SINGULAR_RATIO * max
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>, FrechetError> {
    let SymmetricEigen { eigenvectors, eigenvalues } =
        m.clone().try_symmetric_eigen(f64::EPSILON, 0).ok_or(FrechetError::SqrtFailed)?;
    let roots = DMatrix::from_diagonal(&eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&eigenvectors * roots * eigenvectors.transpose())
}

pub fn frechet_distance<T: Real>(g1: &GaussianFit<T>, g2: &GaussianFit<T>) -> Result<FrechetScore<T>, FrechetError> {
    if g1.dim() != g2.dim() {
        return Err(FrechetError::DimMismatch(g1.dim(), g2.dim()));
    }
    let (mut s1, mut s2) = (g1.cov_matrix(), g2.cov_matrix());
    let e1 = check_covariance(&s1)?;
    let e2 = check_covariance(&s2)?;
    if g1 == g2 {
        return Ok(FrechetScore { distance: T::zero(), regularized: false });
    }
    let regularized = near_singular(&e1) || near_singular(&e2);
    if regularized {
        let eps = DMatrix::<f64>::identity(g1.dim(), g1.dim()) * REGULARIZATION;
        s1 += &eps;
        s2 += &eps;
    }
    let root1 = psd_sqrt(&s1)?;
    let mut inner = &root1 * &s2 * &root1;
    inner = (&inner + inner.transpose()) * 0.5;
    let cross = inner
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or(FrechetError::SqrtFailed)?
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum::<f64>();
    let mean_term: f64 = g1
        .mean
        .iter()
        .zip(&g2.mean)
        .map(|(a, b)| {
            let d = a.to_f64_lossy() - b.to_f64_lossy();
            d * d
        })
        .sum();
    let distance = (mean_term + s1.trace() + s2.trace() - 2.0 * cross).max(0.0);
    if !distance.is_finite() {
        return Err(FrechetError::SqrtFailed);
    }
    Ok(FrechetScore { distance: T::lit(distance), regularized })
}
