//! Independent reference implementations and generators shared by the
//! integration tests and the acceptance harness.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};

use image::{Rgb, RgbImage};
use lipleak::{EmbeddingTrack, TrackKind};
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_rows(rng: &mut StdRng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

pub fn track64(kind: TrackKind, rows: &[Vec<f64>]) -> EmbeddingTrack<f64> {
    EmbeddingTrack::from_rows(kind, 25_000, rows).unwrap()
}

pub fn track32(kind: TrackKind, rows: &[Vec<f64>]) -> EmbeddingTrack<f32> {
    let rows: Vec<Vec<f32>> = rows.iter().map(|r| r.iter().map(|&x| x as f32).collect()).collect();
    EmbeddingTrack::from_rows(kind, 25_000, &rows).unwrap()
}

/// Per-offset mean distance by direct double loop over `(o, t)`.
pub fn profile_oracle(v: &[Vec<f64>], a: &[Vec<f64>], w: usize) -> Vec<f64> {
    let w = w as i64;
    let mut out = Vec::new();
    for o in -w..=w {
        let mut sum = 0.0;
        let mut n = 0usize;
        for t in 0..v.len() as i64 {
            let j = t + o;
            if j < 0 || j >= a.len() as i64 {
                continue;
            }
            let mut sq = 0.0;
            for k in 0..v[t as usize].len() {
                let d = v[t as usize][k] - a[j as usize][k];
                sq += d * d;
            }
            sum += sq.sqrt();
            n += 1;
        }
        out.push(sum / n as f64);
    }
    out
}

/// `(visual, audio)` with `a_t = v_{t+k}`, both `t_len` rows, cut from one base track.
pub fn shifted_pair(rng: &mut StdRng, t_len: usize, dim: usize, w: usize, k: i64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let base = random_rows(rng, t_len + 2 * w, dim);
    let v = (0..t_len).map(|t| base[w + t].clone()).collect();
    let a = (0..t_len).map(|t| base[(w as i64 + t as i64 + k) as usize].clone()).collect();
    (v, a)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

/// Fixed 16×16 test patterns.
pub fn pattern(which: u32) -> RgbImage {
    RgbImage::from_fn(16, 16, |x, y| match which {
        0 => Rgb([(x * 16) as u8, (y * 16) as u8, ((x + y) * 8) as u8]),
        1 => Rgb([((x * y * 7) % 256) as u8, (255 - x * 15) as u8, if (x / 4 + y / 4) % 2 == 0 { 30 } else { 220 }]),
        2 => Rgb([((x ^ y) * 17 % 256) as u8, ((x * 3 + y * 5) * 5 % 256) as u8, 128]),
        _ => Rgb([200, (y * 13 % 256) as u8, (x * 11 % 256) as u8]),
    })
}

/// SSIM by the textbook formula: for every window position, Gaussian-weighted
/// moments from an explicit 2-D kernel; 11×11, σ = 1.5, K = (0.01, 0.03), L = 255.
pub fn ssim_oracle(a: &RgbImage, b: &RgbImage) -> f64 {
    let win = 11usize;
    let sigma: f64 = 1.5;
    let r = (win / 2) as f64;
    let mut k2d = vec![vec![0.0; win]; win];
    let mut total = 0.0;
    for (i, row) in k2d.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - r, j as f64 - r);
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let (w, h) = (a.width() as usize, a.height() as usize);
    let mut channel_sum = 0.0;
    for c in 0..3 {
        let mut s = 0.0;
        let mut n = 0;
        for y0 in 0..=h - win {
            for x0 in 0..=w - win {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..win {
                    for j in 0..win {
                        let g = k2d[i][j] / total;
                        let p = f64::from(a.get_pixel((x0 + j) as u32, (y0 + i) as u32)[c]);
                        let q = f64::from(b.get_pixel((x0 + j) as u32, (y0 + i) as u32)[c]);
                        mx += g * p;
                        my += g * q;
                        sxx += g * p * p;
                        syy += g * q * q;
                        sxy += g * p * q;
                    }
                }
                let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                s += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                n += 1;
            }
        }
        channel_sum += s / n as f64;
    }
    channel_sum / 3.0
}

/// Random symmetric positive-definite `d × d` matrix, row-major.
pub fn random_spd(rng: &mut StdRng, d: usize) -> Vec<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let m = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
    row_major(&m)
}

pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn from_row_major(d: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, v)
}

/// Random orthogonal matrix from the QR factorization of a Gaussian-ish matrix.
pub fn random_rotation(rng: &mut StdRng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

/// True iff `pairs` maps the id set onto itself bijectively with no fixed point.
pub fn is_derangement(ids: &[String], pairs: &BTreeMap<String, String>) -> bool {
    let domain: BTreeSet<&String> = ids.iter().collect();
    let keys: BTreeSet<&String> = pairs.keys().collect();
    let values: BTreeSet<&String> = pairs.values().collect();
    keys == domain && values == domain && pairs.len() == ids.len() && pairs.iter().all(|(a, b)| a != b)
}

pub fn random_track32(rng: &mut StdRng) -> EmbeddingTrack<f32> {
    let kind = TrackKind::ALL[rng.random_range(0..4)];
    let dim = rng.random_range(1..=64);
    let count = rng.random_range(0..=40);
    let data = (0..dim * count)
        .map(|_| match rng.random_range(0..10) {
            0 => 0.0,
            1 => -0.0,
            2 => f32::MIN_POSITIVE / 2.0,
            3 => f32::MAX,
            _ => f32::from_bits(rng.random::<u32>() & 0xBFFF_FFFF),
        })
        .collect();
    EmbeddingTrack::new(kind, dim, rng.random_range(1..120_000), data).unwrap()
}

/// Writes `frames` 16×16 PNGs and a mono WAV of `audio_samples` samples,
/// returning the manifest entry (absolute paths).
pub fn write_clip(
    root: &std::path::Path,
    id: &str,
    frames: u64,
    fps: lipleak::Fps,
    sample_rate: u32,
    audio_samples: usize,
) -> lipleak::ClipEntry {
    let frame_dir = root.join("clips").join(id);
    std::fs::create_dir_all(&frame_dir).unwrap();
    for f in 0..frames {
        let v = (f * 7 % 256) as u8;
        RgbImage::from_pixel(16, 16, Rgb([v, 255 - v, 80])).save(frame_dir.join(format!("{f:05}.png"))).unwrap();
    }
    let audio_path = root.join("audio").join(format!("{id}.wav"));
    std::fs::create_dir_all(audio_path.parent().unwrap()).unwrap();
    let samples: Vec<i16> = (0..audio_samples).map(|i| ((i % 50) as i16 - 25) * 400).collect();
    lipleak::wav::write_mono16(&audio_path, sample_rate, &samples).unwrap();
    lipleak::ClipEntry { clip_id: id.into(), frame_dir, audio_path, fps, sample_rate, frame_count: frames }
}

pub fn write_manifest(path: &std::path::Path, clips: &[lipleak::ClipEntry]) {
    let text: String = clips.iter().map(|c| lipleak::manifest::manifest_line(c) + "\n").collect();
    std::fs::write(path, text).unwrap();
}

/// `n` valid 25 fps / 16 kHz clips of 10 frames, ids `c0..`.
pub fn small_corpus(root: &std::path::Path, n: usize) -> Vec<lipleak::ClipEntry> {
    (0..n).map(|i| write_clip(root, &format!("c{i}"), 10, lipleak::Fps::from_integer(25), 16_000, 6400)).collect()
}

/// Published lip-sync scores per method: for each setup (AM, XM, SI) the tuple
/// is (LSE-C AR, LSE-C CR, LSE-D AR, LSE-D CR), in the column order printed.
pub const PUBLISHED_SYNC: [(&str, [[f64; 4]; 3]); 6] = [
    ("Wav2Lip", [[7.59, 7.73, 6.75, 6.44], [7.98, 7.35, 6.79, 7.18], [2.57, 3.64, 8.98, 8.15]]),
    ("TalkLip", [[8.53, 9.27, 6.08, 5.54], [6.04, 4.80, 8.21, 9.40], [2.35, 5.21, 10.82, 8.34]]),
    ("IPLAP", [[5.96, 6.49, 7.54, 7.16], [3.63, 3.71, 10.10, 10.02], [2.71, 2.74, 8.82, 8.82]]),
    ("AVTFG", [[7.94, 7.95, 6.35, 6.30], [6.90, 6.84, 8.63, 7.90], [2.75, 6.31, 8.90, 6.81]]),
    ("PLGAN", [[7.68, 8.41, 6.43, 6.03], [7.95, 7.58, 6.64, 6.81], [2.70, 2.93, 9.02, 8.51]]),
    ("Diff2Lip", [[7.82, 7.87, 6.48, 6.46], [7.62, 6.71, 6.59, 7.26], [2.95, 2.79, 10.21, 9.52]]),
];

/// Published leakage table: (LSE-C_S, LSE-D_S, LSD-CR, LSD-AR).
pub const PUBLISHED_LEAKAGE: [(&str, [f64; 4]); 6] = [
    ("Wav2Lip", [3.64, 8.15, 0.56, 0.22]),
    ("TalkLip", [5.21, 8.34, 4.16, 2.31]),
    ("IPLAP", [2.74, 8.82, 2.82, 2.45]),
    ("AVTFG", [6.31, 6.81, 1.36, 1.66]),
    ("PLGAN", [2.93, 8.51, 0.80, 0.24]),
    ("Diff2Lip", [2.79, 9.52, 0.98, 0.15]),
];

pub fn record(
    method: &str,
    clip: &str,
    setup: lipleak::SetupKind,
    reference: lipleak::ReferenceStrategy,
    metric: &str,
    value: f64,
) -> lipleak::MetricRecord {
    lipleak::MetricRecord {
        method_name: method.into(),
        clip_id: clip.into(),
        setup,
        reference,
        metric_name: metric.into(),
        value,
    }
}

/// One corpus-level record per published LSE cell.
pub fn published_sync_records() -> Vec<lipleak::MetricRecord> {
    use lipleak::{ArDetail, ReferenceStrategy, SetupKind};
    let mut out = Vec::new();
    for (method, setups) in PUBLISHED_SYNC {
        for (setup, v) in SetupKind::ALL.into_iter().zip(setups) {
            let ar = ReferenceStrategy::Alternative(ArDetail::FirstFrame);
            let cr = ReferenceStrategy::Current;
            out.push(record(method, "corpus", setup, ar.clone(), "lse_c", v[0]));
            out.push(record(method, "corpus", setup, cr.clone(), "lse_c", v[1]));
            out.push(record(method, "corpus", setup, ar, "lse_d", v[2]));
            out.push(record(method, "corpus", setup, cr, "lse_d", v[3]));
        }
    }
    out
}
