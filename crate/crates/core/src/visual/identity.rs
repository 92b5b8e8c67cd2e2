//! Identity preservation as cosine similarity of face embeddings.

use crate::model::{EmbeddingTrack, TrackKind};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IdentityError {
    #[error("embedding dims differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("zero-norm identity embedding")]
    ZeroNorm,
    #[error("expected identity tracks, got {0}")]
    WrongKind(TrackKind),
    #[error("no overlapping frames")]
    Empty,
}

/// `a·b / (‖a‖ ‖b‖)`.
pub fn csim<T: Real>(a: &[T], b: &[T]) -> Result<T, IdentityError> {
    if a.len() != b.len() {
        return Err(IdentityError::DimMismatch(a.len(), b.len()));
    }
    let dot: T = a.iter().zip(b).map(|(x, y)| *x * *y).sum();
    let na = a.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let nb = b.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        return Err(IdentityError::ZeroNorm);
    }
    Ok((dot / (na * nb)).max(-T::one()).min(T::one()))
}

/// Per-frame cosine similarity over the overlapping prefix, averaged.
pub fn csim_tracks<T: Real>(generated: &EmbeddingTrack<T>, target: &EmbeddingTrack<T>) -> Result<T, IdentityError> {
    for t in [generated, target] {
        if t.kind() != TrackKind::Identity {
            return Err(IdentityError::WrongKind(t.kind()));
        }
    }
    let n = generated.count().min(target.count());
    if n == 0 {
        return Err(IdentityError::Empty);
    }
    let mut total = T::zero();
    for i in 0..n {
        total += csim(generated.row(i), target.row(i))?;
    }
    Ok(total / T::from_usize_lossy(n))
}

/// Similarity of every generated frame to one fixed target embedding.
pub fn csim_against<T: Real>(generated: &EmbeddingTrack<T>, target: &[T]) -> Result<T, IdentityError> {
    if generated.count() == 0 {
        return Err(IdentityError::Empty);
    }
    let mut total = T::zero();
    for row in generated.rows() {
        total += csim(row, target)?;
    }
    Ok(total / T::from_usize_lossy(generated.count()))
}
