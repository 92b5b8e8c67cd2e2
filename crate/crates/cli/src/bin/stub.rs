//! `lipleak-stub`: deterministic stand-ins for a generator and a feature
//! extractor, plus a synthetic corpus whose lip signal is a per-frame
//! loudness envelope shared by the audio and the lower half of each frame.
//!
//! Generator modes:
//! - `follow` drives the mouth from the loudness of the driving audio;
//! - `leak` copies the mouth of the reference frame and ignores the audio.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use image::{Rgb, RgbImage};
use lipleak::embt::write_embedding_track;
use lipleak::frames::{load_frames, write_frames};
use lipleak::landmark_file::write_landmark_track;
use lipleak::manifest::manifest_line;
use lipleak::prng::SplitMix64;
use lipleak::wav::{read_samples, write_mono16};
use lipleak::{ArDetail, ClipEntry, EmbeddingTrack, Fps, GenerationJob, LandmarkTrack, ReferenceStrategy, TrackKind};

const SIZE: u32 = 32;
const LENGTHS: [u64; 4] = [50, 56, 60, 64];
const PERIOD: usize = 16;

#[derive(Parser)]
#[command(name = "lipleak-stub", about = "Synthetic adapters for exercising the lipleak pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Follow,
    Leak,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FailMode {
    Exit,
    Hang,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus and its manifest.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        clips: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Generator adapter.
    Generate {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        reference: String,
        #[arg(long)]
        job: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 25)]
        fps: u32,
        /// Fail matching jobs while this file exists.
        #[arg(long)]
        fail_while: Option<PathBuf>,
        /// Substring of the job id selecting the jobs to fail.
        #[arg(long, default_value = "")]
        fail_match: String,
        #[arg(long, value_enum, default_value = "exit")]
        fail_mode: FailMode,
    },
    /// Extractor adapter writing all five feature artifacts.
    Extract {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 25)]
        fps: u32,
        #[arg(long, default_value_t = 5)]
        window: usize,
    },
}

fn texture(clip: usize, x: u32, y: u32) -> Rgb<u8> {
    let c = clip as u32;
    Rgb([
        ((x * 8 + c * 40) % 256) as u8,
        ((y * 16 + c * 70) % 256) as u8,
        (((x ^ y) * 8 + c * 30) % 256) as u8,
    ])
}

fn with_mouth(upper: &RgbImage, mouth: u8) -> RgbImage {
    let (w, h) = upper.dimensions();
    RgbImage::from_fn(w, h, |x, y| if y >= h / 2 { Rgb([mouth; 3]) } else { *upper.get_pixel(x, y) })
}

fn synth_corpus(out: &Path, clips: usize, seed: u64) -> Result<()> {
    let mut seeds = SplitMix64::new(seed);
    let mut lines = Vec::new();
    for i in 0..clips {
        let id = format!("clip{i:02}");
        let frames_n = LENGTHS[i % LENGTHS.len()];
        let mut rng = SplitMix64::new(seeds.next_u64());
        let envelope: Vec<f64> = (0..frames_n).map(|_| 0.1 + 0.8 * rng.next_f64()).collect();
        let base = RgbImage::from_fn(SIZE, SIZE, |x, y| texture(i, x, y));
        let frames: Vec<RgbImage> = envelope.iter().map(|e| with_mouth(&base, (e * 255.0).round() as u8)).collect();
        let frame_dir = Path::new("clips").join(&id);
        write_frames(&out.join(&frame_dir), &frames)?;

        let spf = 16_000 / 25;
        let mut samples = Vec::with_capacity(spf * envelope.len());
        for e in &envelope {
            let amp = (e * 32767.0).round() as i16;
            samples.extend((0..spf).map(|k| if (k / (PERIOD / 2)).is_multiple_of(2) { amp } else { -amp }));
        }
        let audio_path = Path::new("audio").join(format!("{id}.wav"));
        fs::create_dir_all(out.join("audio"))?;
        write_mono16(&out.join(&audio_path), 16_000, &samples)?;
        lines.push(manifest_line(&ClipEntry {
            clip_id: id,
            frame_dir,
            audio_path,
            fps: Fps::from_integer(25),
            sample_rate: 16_000,
            frame_count: frames_n,
        }));
    }
    fs::write(out.join("manifest.jsonl"), lines.join("\n") + "\n")?;
    Ok(())
}

fn mouth_level(frame: &RgbImage) -> f64 {
    let (w, h) = frame.dimensions();
    let mut sum = 0u64;
    let mut n = 0u64;
    for y in h / 2..h {
        for x in 0..w {
            sum += frame.get_pixel(x, y).0.iter().map(|&v| u64::from(v)).sum::<u64>();
            n += 3;
        }
    }
    sum as f64 / n.max(1) as f64
}

/// Root-mean-square level of each frame period, in `[0, 1]`.
fn audio_levels(path: &Path, fps: u32) -> Result<Vec<f64>> {
    let (info, samples) = read_samples(path)?;
    let spf = (info.sample_rate / fps) as usize;
    if spf == 0 {
        bail!("sample rate {} below frame rate {fps}", info.sample_rate);
    }
    Ok(samples
        .chunks_exact(spf)
        .map(|c| (c.iter().map(|&s| f64::from(s).powi(2)).sum::<f64>() / spf as f64).sqrt() / 32767.0)
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn generate(mode: Mode, frames: &Path, audio: &Path, reference: &str, job: &Path, out: &Path, fps: u32) -> Result<ExitCode> {
    let job: GenerationJob = serde_json::from_slice(&fs::read(job)?).context("reading job file")?;
    let reference: ReferenceStrategy = reference.parse().map_err(anyhow::Error::msg)?;
    let n = job.effective_frame_count as usize;
    let input = load_frames(frames, Some(n))?;
    if input.len() < n {
        bail!("{} input frames, job needs {n}", input.len());
    }
    let mouths: Vec<f64> = match mode {
        Mode::Follow => {
            let levels = audio_levels(audio, fps)?;
            (0..n).map(|t| levels.get(t).copied().unwrap_or(0.0) * 255.0).collect()
        }
        Mode::Leak => {
            let all = load_frames(frames, None)?;
            match &reference {
                ReferenceStrategy::Current => input.iter().map(mouth_level).collect(),
                ReferenceStrategy::Alternative(detail) => {
                    let pick: Vec<&RgbImage> = match detail {
                        ArDetail::FirstFrame => vec![&all[0]],
                        ArDetail::MultiFrame(k) => all.iter().take(*k as usize).collect(),
                        ArDetail::RandomFrame => vec![&all[SplitMix64::new(all.len() as u64).below(all.len() as u64) as usize]],
                        ArDetail::Custom(label) => {
                            eprintln!("unsupported reference strategy custom:{label}");
                            return Ok(ExitCode::from(4));
                        }
                    };
                    let level = pick.iter().map(|f| mouth_level(f)).sum::<f64>() / pick.len() as f64;
                    vec![level; n]
                }
            }
        }
    };
    let generated: Vec<RgbImage> = input.iter().zip(&mouths).map(|(f, m)| with_mouth(f, m.round().clamp(0.0, 255.0) as u8)).collect();
    write_frames(&out.join("frames"), &generated)?;
    Ok(ExitCode::SUCCESS)
}

fn windows(levels: &[f64], count: usize, window: usize) -> Vec<Vec<f32>> {
    (0..count)
        .map(|t| (0..window).map(|j| levels[(t + j).min(levels.len() - 1)] as f32).collect())
        .collect()
}

fn block_means(frame: &RgbImage, y0: u32, y1: u32, cols: u32, rows: u32, per_channel: bool) -> Vec<f32> {
    let w = frame.width();
    let mut out = Vec::new();
    for by in 0..rows {
        for bx in 0..cols {
            let (xa, xb) = (bx * w / cols, (bx + 1) * w / cols);
            let (ya, yb) = (y0 + by * (y1 - y0) / rows, y0 + (by + 1) * (y1 - y0) / rows);
            let mut sums = [0f64; 3];
            let mut n = 0f64;
            for y in ya..yb {
                for x in xa..xb {
                    let p = frame.get_pixel(x, y).0;
                    for c in 0..3 {
                        sums[c] += f64::from(p[c]);
                    }
                    n += 1.0;
                }
            }
            let n = n.max(1.0) * 255.0;
            if per_channel {
                out.extend(sums.iter().map(|s| (s / n) as f32));
            } else {
                out.push((sums.iter().sum::<f64>() / (3.0 * n)) as f32);
            }
        }
    }
    out
}

fn landmarks(frame: &RgbImage) -> Vec<[f32; 2]> {
    let (w, h) = (frame.width() as f32, frame.height() as f32);
    let open = (mouth_level(frame) / 255.0) as f32;
    (0..68)
        .map(|i| match i {
            36 => [0.3 * w, 0.3 * h],
            45 => [0.7 * w, 0.3 * h],
            48..=67 => {
                let a = std::f32::consts::TAU * (i - 48) as f32 / 20.0;
                [0.5 * w + 0.2 * w * a.cos(), 0.75 * h + (0.02 + 0.15 * open) * h * a.sin()]
            }
            _ => [(i % 12) as f32 * w / 12.0, (i / 12) as f32 * h / 12.0],
        })
        .collect()
}

fn extract(frames: &Path, audio: &Path, out: &Path, fps: u32, window: usize) -> Result<()> {
    let frames = load_frames(frames, None)?;
    if frames.len() < window {
        bail!("{} frames, the sync window needs {window}", frames.len());
    }
    let audio = audio_levels(audio, fps)?;
    if audio.is_empty() {
        bail!("audio shorter than one frame");
    }
    fs::create_dir_all(out)?;
    let rate = fps * 1000;
    let mouths: Vec<f64> = frames.iter().map(|f| mouth_level(f) / 255.0).collect();
    let h = frames[0].height();
    let tracks = [
        (TrackKind::VisualSync, windows(&mouths, frames.len(), window)),
        (TrackKind::AudioSync, windows(&audio, audio.len().min(frames.len()), window)),
        (TrackKind::Identity, frames.iter().map(|f| block_means(f, 0, h / 2, 4, 2, true)).collect()),
        (TrackKind::Distribution, frames.iter().map(|f| block_means(f, 0, h, 4, 4, false)).collect()),
    ];
    for (kind, rows) in tracks {
        let track = EmbeddingTrack::from_rows(kind, rate, &rows)?;
        write_embedding_track(&track, &out.join(format!("{}.embt", kind.name())))?;
    }
    let lm = LandmarkTrack::new("ibug68", 68, lipleak::model::MOUTH_68.collect(), frames.iter().map(|f| Some(landmarks(f))).collect())?;
    write_landmark_track(&lm, &out.join("landmarks.txt"))?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::SynthCorpus { out, clips, seed } => synth_corpus(&out, clips, seed).map(|()| ExitCode::SUCCESS),
        Command::Generate { mode, frames, audio, reference, job, out, fps, fail_while, fail_match, fail_mode } => {
            if let Some(flag) = fail_while {
                let id = serde_json::from_slice::<GenerationJob>(&fs::read(&job)?).map(|j| j.job_id()).unwrap_or_default();
                if flag.exists() && id.contains(&fail_match) {
                    eprintln!("injected failure for {id}");
                    if fail_mode == FailMode::Hang {
                        std::thread::sleep(Duration::from_secs(3600));
                    }
                    return Ok(ExitCode::from(3));
                }
            }
            generate(mode, &frames, &audio, &reference, &job, &out, fps)
        }
        Command::Extract { frames, audio, out, fps, window } => extract(&frames, &audio, &out, fps, window).map(|()| ExitCode::SUCCESS),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lipleak-stub: {e:#}");
            ExitCode::from(1)
        }
    }
}
