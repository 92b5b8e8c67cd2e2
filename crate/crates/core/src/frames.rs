//! Frame directories: ordered 8-bit RGB image files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use image::RgbImage;

const EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "bmp", "ppm", "pnm"];

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Decode { path: String, source: image::ImageError },
    #[error("{path}: {found:?} differs from the clip's frame size {expected:?}")]
    SizeMismatch { path: String, expected: (u32, u32), found: (u32, u32) },
}

fn is_frame_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Frame files of a directory in lexicographic filename order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>, FrameError> {
    let entries = fs::read_dir(dir).map_err(|source| FrameError::Io { path: dir.display().to_string(), source })?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| FrameError::Io { path: dir.display().to_string(), source })?;
        let path = entry.path();
        if is_frame_file(&path) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Reads only the image header.
pub fn frame_size(path: &Path) -> Result<(u32, u32), FrameError> {
    image::image_dimensions(path).map_err(|source| FrameError::Decode { path: path.display().to_string(), source })
}

pub fn load_frame(path: &Path) -> Result<RgbImage, FrameError> {
    let img = image::open(path).map_err(|source| FrameError::Decode { path: path.display().to_string(), source })?;
    Ok(img.to_rgb8())
}

/// Loads up to `limit` frames, requiring identical dimensions.
pub fn load_frames(dir: &Path, limit: Option<usize>) -> Result<Vec<RgbImage>, FrameError> {
    let files = list_frames(dir)?;
    let take = limit.unwrap_or(files.len()).min(files.len());
    let mut frames: Vec<RgbImage> = Vec::with_capacity(take);
    for path in &files[..take] {
        let img = load_frame(path)?;
        if let Some(first) = frames.first() {
            if first.dimensions() != img.dimensions() {
                return Err(FrameError::SizeMismatch {
                    path: path.display().to_string(),
                    expected: first.dimensions(),
                    found: img.dimensions(),
                });
            }
        }
        frames.push(img);
    }
    Ok(frames)
}

/// Writes frames as `frame_00000.png`, `frame_00001.png`, ...
pub fn write_frames(dir: &Path, frames: &[RgbImage]) -> Result<(), FrameError> {
    fs::create_dir_all(dir).map_err(|source| FrameError::Io { path: dir.display().to_string(), source })?;
    for (i, frame) in frames.iter().enumerate() {
        let path = dir.join(frame_file_name(i));
        frame
            .save(&path)
            .map_err(|source| FrameError::Decode { path: path.display().to_string(), source })?;
    }
    Ok(())
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}
