//! Experiment grid: matched, mismatched and silent-input jobs, each under the
//! current and alternative identity reference.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{ArDetail, ClipEntry, ClipManifest, GenerationJob, ReferenceStrategy, SetupKind};
use crate::prng::SplitMix64;
use crate::wav::{self, WavError};
use crate::Fps;

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("no derangement exists for {0} clip(s); mismatched pairing needs at least 2")]
    TooFewClips(usize),
    #[error("duplicate clip id {0:?} in pairing input")]
    DuplicateId(String),
    #[error("silent audio needs at least one sample (duration {duration_s}s at {sample_rate} Hz)")]
    EmptySilence { duration_s: f64, sample_rate: u32 },
    #[error("length alignment of {frame_count} frames against {audio_samples} samples leaves no frames")]
    NoOverlap { frame_count: u64, audio_samples: u64 },
    #[error("length alignment inputs must be positive")]
    NonPositive,
    #[error("at least one method is required")]
    NoMethods,
    #[error("name {0:?} cannot be used as a path component")]
    BadName(String),
    #[error("invalid alternative reference {detail} for method {method:?}")]
    BadReference { method: String, detail: String },
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("job manifest line {line}: {message}")]
    MalformedJob { line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SetupError + '_ {
    move |source| SetupError::Io { path: path.display().to_string(), source }
}

/// Mismatched-audio partner of every clip.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingMap {
    pub seed: u64,
    pub pairs: BTreeMap<String, String>,
}

impl PairingMap {
    pub fn partner(&self, clip_id: &str) -> Option<&str> {
        self.pairs.get(clip_id).map(String::as_str)
    }
}

/// Pairs every clip with another clip's audio via Sattolo's shuffle.
///
/// Sattolo's algorithm yields a single n-cycle, so no clip keeps its own audio.
/// For `i` from `n-1` down to `1`, swap position `i` with a uniformly drawn
/// `j < i` (see [`SplitMix64::below`]). Clip `ids[k]` is paired with
/// `ids[perm[k]]`.
pub fn derange_pairing(ids: &[String], seed: u64) -> Result<PairingMap, SetupError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(SetupError::DuplicateId(id.clone()));
        }
    }
    if ids.len() < 2 {
        return Err(SetupError::TooFewClips(ids.len()));
    }
    let mut perm: Vec<usize> = (0..ids.len()).collect();
    let mut rng = SplitMix64::new(seed);
    for i in (1..perm.len()).rev() {
        let j = rng.below(i as u64) as usize;
        perm.swap(i, j);
    }
    let pairs = ids.iter().zip(&perm).map(|(id, &k)| (id.clone(), ids[k].clone())).collect();
    Ok(PairingMap { seed, pairs })
}

/// What a silent-input waveform contains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SilenceKind {
    /// Digital zero.
    #[default]
    Zero,
    /// Uniform integer noise in `[-amplitude, amplitude]`, for models that
    /// reject all-zero input.
    NoiseFloor { amplitude: u16, seed: u64 },
}

impl SilenceKind {
    fn samples(self, count: usize) -> Vec<i16> {
        match self {
            SilenceKind::Zero => vec![0; count],
            SilenceKind::NoiseFloor { amplitude, seed } => {
                let mut rng = SplitMix64::new(seed);
                let span = 2 * u64::from(amplitude) + 1;
                (0..count).map(|_| (rng.below(span) as i64 - i64::from(amplitude)) as i16).collect()
            }
        }
    }

    /// Largest absolute sample value this kind may produce.
    pub fn bound(self) -> i16 {
        match self {
            SilenceKind::Zero => 0,
            SilenceKind::NoiseFloor { amplitude, .. } => amplitude.min(i16::MAX as u16) as i16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AudioFileHandle {
    pub path: PathBuf,
    pub sample_rate: u32,
    pub samples: u64,
}

pub(crate) fn write_silence(
    samples: u64,
    sample_rate: u32,
    out_path: &Path,
    silence: SilenceKind,
) -> Result<AudioFileHandle, SetupError> {
    if let Some(parent) = out_path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    wav::write_mono16(out_path, sample_rate, &silence.samples(samples as usize))?;
    Ok(AudioFileHandle { path: out_path.to_path_buf(), sample_rate, samples })
}

/// Writes `round(duration_s * sample_rate)` silent mono 16-bit samples.
pub fn make_silent_audio(
    duration_s: f64,
    sample_rate: u32,
    out_path: &Path,
    silence: SilenceKind,
) -> Result<AudioFileHandle, SetupError> {
    let samples = (duration_s * f64::from(sample_rate)).round();
    if samples.is_nan() || samples < 1.0 {
        return Err(SetupError::EmptySilence { duration_s, sample_rate });
    }
    write_silence(samples as u64, sample_rate, out_path, silence)
}

/// Frames usable when a video is driven by audio of a possibly different length:
/// `min(frame_count, floor(audio_samples / sample_rate * fps))`.
pub fn align_lengths(frame_count: u64, fps: Fps, audio_samples: u64, sample_rate: u32) -> Result<u64, SetupError> {
    if frame_count == 0 || *fps.numer() <= 0 || audio_samples == 0 || sample_rate == 0 {
        return Err(SetupError::NonPositive);
    }
    let audio_frames = (Fps::new(audio_samples as i64, i64::from(sample_rate)) * fps).floor().to_integer() as u64;
    let effective = frame_count.min(audio_frames);
    if effective == 0 {
        return Err(SetupError::NoOverlap { frame_count, audio_samples });
    }
    Ok(effective)
}

/// A method under evaluation and its alternative-reference strategy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    /// `None` means the first frame is used.
    pub ar_detail: Option<ArDetail>,
}

impl MethodSpec {
    pub fn new(name: impl Into<String>, ar_detail: Option<ArDetail>) -> Self {
        Self { name: name.into(), ar_detail }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMethod {
    pub name: String,
    pub ar_detail: ArDetail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetupGrid {
    pub seed: u64,
    pub methods: Vec<GridMethod>,
    pub pairing: PairingMap,
    pub silence: SilenceKind,
    pub jobs: Vec<GenerationJob>,
}

impl SetupGrid {
    pub fn count(&self, setup: SetupKind) -> usize {
        self.jobs.iter().filter(|j| j.setup == setup).count()
    }
}

fn check_name(name: &str) -> Result<(), SetupError> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains(['/', '\\', '\0'])
        && name != crate::model::CORPUS_CLIP;
    if ok {
        Ok(())
    } else {
        Err(SetupError::BadName(name.to_string()))
    }
}

pub fn silent_audio_path(out_dir: &Path, clip_id: &str) -> PathBuf {
    out_dir.join("silent").join(format!("{clip_id}.wav"))
}

pub fn job_output_dir(out_dir: &Path, method: &str, setup: SetupKind, reference: &ReferenceStrategy, clip_id: &str) -> PathBuf {
    out_dir
        .join("generated")
        .join(method)
        .join(format!("{}_{}", setup, reference.kind()))
        .join(clip_id)
}

fn silent_samples(clip: &ClipEntry) -> u64 {
    let duration = Fps::from_integer(clip.frame_count as i64) / clip.fps;
    (duration * Fps::from_integer(i64::from(clip.sample_rate))).round().to_integer() as u64
}

/// Expands methods × clips × {AM, XM, SI} × {CR, AR} into generation jobs,
/// writing the silent waveforms under `out_dir/silent/`.
pub fn build_setup_grid(
    manifest: &ClipManifest,
    methods: &[MethodSpec],
    seed: u64,
    out_dir: &Path,
    silence: SilenceKind,
) -> Result<SetupGrid, SetupError> {
    if methods.is_empty() {
        return Err(SetupError::NoMethods);
    }
    let grid_methods: Vec<GridMethod> = methods
        .iter()
        .map(|m| {
            check_name(&m.name)?;
            let ar_detail = m.ar_detail.clone().unwrap_or_default();
            if !ar_detail.is_valid() {
                return Err(SetupError::BadReference { method: m.name.clone(), detail: ar_detail.to_string() });
            }
            Ok(GridMethod { name: m.name.clone(), ar_detail })
        })
        .collect::<Result<_, _>>()?;
    let ids = manifest.clip_ids();
    let pairing = derange_pairing(&ids, seed)?;
    for id in &ids {
        check_name(id)?;
    }

    let mut audio_samples = BTreeMap::new();
    for clip in &manifest.clips {
        audio_samples.insert(clip.clip_id.as_str(), wav::read_info(&clip.audio_path)?.samples);
    }

    let mut silent = BTreeMap::new();
    for clip in &manifest.clips {
        let path = silent_audio_path(out_dir, &clip.clip_id);
        let handle = write_silence(silent_samples(clip), clip.sample_rate, &path, silence)?;
        silent.insert(clip.clip_id.as_str(), handle);
    }

    let mut jobs = Vec::with_capacity(6 * ids.len() * grid_methods.len());
    for method in &grid_methods {
        let references = [ReferenceStrategy::Current, ReferenceStrategy::Alternative(method.ar_detail.clone())];
        for clip in &manifest.clips {
            let partner_id = pairing.partner(&clip.clip_id).expect("pairing covers every clip");
            let partner = manifest.get(partner_id).expect("partner is a manifest clip");
            for setup in SetupKind::ALL {
                let (audio_path, audio_clip, samples, rate) = match setup {
                    SetupKind::AudioMatched => (
                        clip.audio_path.clone(),
                        Some(clip.clip_id.clone()),
                        audio_samples[clip.clip_id.as_str()],
                        clip.sample_rate,
                    ),
                    SetupKind::AudioMismatched => (
                        partner.audio_path.clone(),
                        Some(partner.clip_id.clone()),
                        audio_samples[partner.clip_id.as_str()],
                        partner.sample_rate,
                    ),
                    SetupKind::SilentInput => {
                        let h = &silent[clip.clip_id.as_str()];
                        (h.path.clone(), None, h.samples, h.sample_rate)
                    }
                };
                let effective_frame_count = align_lengths(clip.frame_count, clip.fps, samples, rate)?;
                for reference in &references {
                    jobs.push(GenerationJob {
                        method_name: method.name.clone(),
                        clip_id: clip.clip_id.clone(),
                        setup,
                        reference: reference.clone(),
                        input_frames: clip.frame_dir.clone(),
                        driving_audio_path: audio_path.clone(),
                        driving_audio_clip: audio_clip.clone(),
                        output_dir: job_output_dir(out_dir, &method.name, setup, reference, &clip.clip_id),
                        effective_frame_count,
                    });
                }
            }
        }
    }
    Ok(SetupGrid { seed, methods: grid_methods, pairing, silence, jobs })
}

/// Checks the setup/audio-source invariants of one job against its manifest.
pub fn validate_job(job: &GenerationJob, manifest: &ClipManifest, silence: SilenceKind) -> Vec<String> {
    let mut issues = Vec::new();
    let Some(clip) = manifest.get(&job.clip_id) else {
        return vec![format!("unknown clip {:?}", job.clip_id)];
    };
    if job.effective_frame_count == 0 || job.effective_frame_count > clip.frame_count {
        issues.push(format!(
            "effective_frame_count {} outside 1..={}",
            job.effective_frame_count, clip.frame_count
        ));
    }
    if let ReferenceStrategy::Alternative(detail) = &job.reference {
        if !detail.is_valid() {
            issues.push(format!("invalid alternative reference {detail}"));
        }
    }
    match job.setup {
        SetupKind::AudioMatched => {
            if job.driving_audio_path != clip.audio_path || job.driving_audio_clip.as_deref() != Some(clip.clip_id.as_str()) {
                issues.push("AM job is not driven by the clip's own audio".into());
            }
        }
        SetupKind::AudioMismatched => match job.driving_audio_clip.as_deref().and_then(|id| manifest.get(id)) {
            Some(partner) if partner.clip_id != clip.clip_id && partner.audio_path == job.driving_audio_path => {}
            Some(partner) if partner.clip_id == clip.clip_id => issues.push("XM job is driven by its own clip".into()),
            _ => issues.push("XM job audio does not belong to another manifest clip".into()),
        },
        SetupKind::SilentInput => {
            if job.driving_audio_clip.is_some() {
                issues.push("SI job names an audio source clip".into());
            }
            match wav::read_samples(&job.driving_audio_path) {
                Err(e) => issues.push(format!("SI audio unreadable: {e}")),
                Ok((info, samples)) => {
                    if info.samples != silent_samples(clip) {
                        issues.push(format!(
                            "SI audio has {} samples, clip duration needs {}",
                            info.samples,
                            silent_samples(clip)
                        ));
                    }
                    let bound = silence.bound();
                    if samples.iter().any(|s| s.unsigned_abs() > bound.unsigned_abs()) {
                        issues.push("SI audio is not silent".into());
                    }
                }
            }
        }
    }
    issues
}

/// Writes one JSON record per job, in grid order.
pub fn write_job_manifest(path: &Path, jobs: &[GenerationJob]) -> Result<(), SetupError> {
    let mut out = Vec::new();
    for job in jobs {
        serde_json::to_writer(&mut out, job).expect("job serializes");
        out.push(b'\n');
    }
    fs::File::create(path).and_then(|mut f| f.write_all(&out)).map_err(io_err(path))
}

pub fn read_job_manifest(path: &Path) -> Result<Vec<GenerationJob>, SetupError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut jobs = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        jobs.push(
            serde_json::from_str(&line).map_err(|e| SetupError::MalformedJob { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(jobs)
}
