//! External process adapters for generation and feature extraction.
//!
//! An adapter is a command template. It is split into words shell-style, then
//! each word has its placeholders replaced, so substituted paths are never
//! re-split. Recognized placeholders:
//!
//! | placeholder        | value                                            |
//! |--------------------|--------------------------------------------------|
//! | `{input_frames}`   | directory of input frames                        |
//! | `{input_audio}`    | driving (or evaluation) audio file               |
//! | `{reference_spec}` | `CR`, `AR:first_frame`, `AR:multi_frame:3`, ...  |
//! | `{output_dir}`     | directory the adapter writes artifacts into      |
//! | `{job_file}`       | JSON serialization of the job                    |
//!
//! Exit status 0 is success; anything else fails the job with captured stderr.
//! An adapter that cannot honor the requested reference strategy must exit
//! nonzero. Processes running past the timeout are killed.
//!
//! Artifacts expected in `{output_dir}`:
//!
//! | kind               | path                 |
//! |--------------------|----------------------|
//! | `generated_frames` | `frames/` (images)   |
//! | `visual_sync`      | `visual_sync.embt`   |
//! | `audio_sync`       | `audio_sync.embt`    |
//! | `identity`         | `identity.embt`      |
//! | `distribution`     | `distribution.embt`  |
//! | `landmarks`        | `landmarks.txt`      |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::embt;
use crate::frames;
use crate::landmark_file;
use crate::model::{GenerationJob, TrackKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    GeneratedFrames,
    VisualSync,
    AudioSync,
    Identity,
    Distribution,
    Landmarks,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 6] = [
        ArtifactKind::GeneratedFrames,
        ArtifactKind::VisualSync,
        ArtifactKind::AudioSync,
        ArtifactKind::Identity,
        ArtifactKind::Distribution,
        ArtifactKind::Landmarks,
    ];

    /// Every kind a feature extractor can emit.
    pub const FEATURES: [ArtifactKind; 5] = [
        ArtifactKind::VisualSync,
        ArtifactKind::AudioSync,
        ArtifactKind::Identity,
        ArtifactKind::Distribution,
        ArtifactKind::Landmarks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArtifactKind::GeneratedFrames => "generated_frames",
            ArtifactKind::VisualSync => "visual_sync",
            ArtifactKind::AudioSync => "audio_sync",
            ArtifactKind::Identity => "identity",
            ArtifactKind::Distribution => "distribution",
            ArtifactKind::Landmarks => "landmarks",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            ArtifactKind::GeneratedFrames => "frames",
            ArtifactKind::VisualSync => "visual_sync.embt",
            ArtifactKind::AudioSync => "audio_sync.embt",
            ArtifactKind::Identity => "identity.embt",
            ArtifactKind::Distribution => "distribution.embt",
            ArtifactKind::Landmarks => "landmarks.txt",
        }
    }

    pub fn track_kind(self) -> Option<TrackKind> {
        match self {
            ArtifactKind::VisualSync => Some(TrackKind::VisualSync),
            ArtifactKind::AudioSync => Some(TrackKind::AudioSync),
            ArtifactKind::Identity => Some(TrackKind::Identity),
            ArtifactKind::Distribution => Some(TrackKind::Distribution),
            _ => None,
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArtifactKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ArtifactKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown artifact kind {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub name: String,
    pub command_template: String,
    pub produces: BTreeSet<ArtifactKind>,
    pub timeout_s: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("adapter {name:?}: {message}")]
    InvalidSpec { name: String, message: String },
    #[error("adapter {name:?}: template uses {{{placeholder}}} but the job has no value for it")]
    MissingValue { name: String, placeholder: &'static str },
    #[error("adapter {name:?} could not start: {source}")]
    Spawn { name: String, source: io::Error },
    #[error("adapter {name:?} exited with {}: {stderr}", exit_code.map_or_else(|| "a signal".to_string(), |c| format!("code {c}")))]
    Failed { name: String, exit_code: Option<i32>, stderr: String },
    #[error("adapter {name:?} timed out after {timeout_s}s")]
    Timeout { name: String, timeout_s: u64, stderr: String },
    #[error("declared artifact {kind} missing at {path}")]
    MissingArtifact { kind: ArtifactKind, path: String },
    #[error("artifact {kind} at {path} is invalid: {message}")]
    InvalidArtifact { kind: ArtifactKind, path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl AdapterSpec {
    pub fn new(name: impl Into<String>, command_template: impl Into<String>, produces: impl IntoIterator<Item = ArtifactKind>, timeout_s: u64) -> Self {
        Self {
            name: name.into(),
            command_template: command_template.into(),
            produces: produces.into_iter().collect(),
            timeout_s,
        }
    }

    pub fn validate(&self) -> Result<(), AdapterError> {
        let invalid = |message: &str| AdapterError::InvalidSpec { name: self.name.clone(), message: message.into() };
        if !self.command_template.contains("{output_dir}") {
            return Err(invalid("command template must contain {output_dir}"));
        }
        if self.produces.is_empty() {
            return Err(invalid("adapter must declare at least one artifact kind"));
        }
        if self.timeout_s == 0 {
            return Err(invalid("timeout must be positive"));
        }
        shell_words::split(&self.command_template).map_err(|e| invalid(&format!("bad command template: {e}")))?;
        Ok(())
    }
}

/// Concrete placeholder values of one adapter run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Invocation {
    pub input_frames: Option<PathBuf>,
    pub input_audio: Option<PathBuf>,
    pub reference_spec: Option<String>,
    pub output_dir: PathBuf,
    pub job_file: Option<PathBuf>,
}

impl Invocation {
    /// Placeholder values of a generation job; the job file lives at
    /// `output_dir/job.json`.
    pub fn for_job(job: &GenerationJob, output_dir: &Path) -> Self {
        Self {
            input_frames: Some(job.input_frames.clone()),
            input_audio: Some(job.driving_audio_path.clone()),
            reference_spec: Some(job.reference.to_string()),
            output_dir: output_dir.to_path_buf(),
            job_file: Some(output_dir.join("job.json")),
        }
    }
}

/// Substitutes placeholders into the split command words.
pub fn render_command(spec: &AdapterSpec, inv: &Invocation) -> Result<Vec<String>, AdapterError> {
    spec.validate()?;
    let words = shell_words::split(&spec.command_template).expect("validated");
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let values: [(&'static str, Option<String>); 5] = [
        ("input_frames", path(&inv.input_frames)),
        ("input_audio", path(&inv.input_audio)),
        ("reference_spec", inv.reference_spec.clone()),
        ("output_dir", Some(inv.output_dir.display().to_string())),
        ("job_file", path(&inv.job_file)),
    ];
    words
        .into_iter()
        .map(|mut word| {
            for (name, value) in &values {
                let token = format!("{{{name}}}");
                if word.contains(&token) {
                    let value = value
                        .as_ref()
                        .ok_or(AdapterError::MissingValue { name: spec.name.clone(), placeholder: name })?;
                    word = word.replace(&token, value);
                }
            }
            Ok(word)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArtifactSet {
    pub output_dir: PathBuf,
    pub artifacts: BTreeMap<ArtifactKind, PathBuf>,
}

impl ArtifactSet {
    pub fn get(&self, kind: ArtifactKind) -> Option<&Path> {
        self.artifacts.get(&kind).map(PathBuf::as_path)
    }
}

/// Result of a successful process run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub artifacts: ArtifactSet,
    pub stderr: String,
    pub elapsed: Duration,
}

fn validate_artifact(kind: ArtifactKind, path: &Path) -> Result<(), AdapterError> {
    let invalid = |message: String| AdapterError::InvalidArtifact { kind, path: path.display().to_string(), message };
    if !path.exists() {
        return Err(AdapterError::MissingArtifact { kind, path: path.display().to_string() });
    }
    match kind {
        ArtifactKind::GeneratedFrames => {
            let files = frames::list_frames(path).map_err(|e| invalid(e.to_string()))?;
            if files.is_empty() {
                return Err(invalid("no frame images".into()));
            }
            let first = frames::frame_size(&files[0]).map_err(|e| invalid(e.to_string()))?;
            for f in &files[1..] {
                let size = frames::frame_size(f).map_err(|e| invalid(e.to_string()))?;
                if size != first {
                    return Err(invalid(format!("{} is {size:?}, first frame is {first:?}", f.display())));
                }
            }
        }
        ArtifactKind::Landmarks => {
            landmark_file::read_landmark_track(path).map_err(|e| invalid(e.to_string()))?;
        }
        embedding => {
            let track_kind = embedding.track_kind().expect("embedding artifact");
            embt::read_embedding_track_of(path, track_kind).map_err(|e| invalid(e.to_string()))?;
        }
    }
    Ok(())
}

/// Checks that every declared artifact exists under `dir` and parses.
pub fn verify_artifacts(produces: &BTreeSet<ArtifactKind>, dir: &Path) -> Result<ArtifactSet, AdapterError> {
    let mut artifacts = BTreeMap::new();
    for &kind in produces {
        let path = dir.join(kind.file_name());
        validate_artifact(kind, &path)?;
        artifacts.insert(kind, path);
    }
    Ok(ArtifactSet { output_dir: dir.to_path_buf(), artifacts })
}

fn drain<R: Read + Send + 'static>(reader: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut text = String::new();
        if let Some(mut r) = reader {
            let mut bytes = Vec::new();
            let _ = r.read_to_end(&mut bytes);
            text = String::from_utf8_lossy(&bytes).into_owned();
        }
        text
    })
}

fn wait_with_timeout(child: &mut std::process::Child, timeout: Duration) -> io::Result<Option<ExitStatus>> {
    let deadline = Instant::now() + timeout;
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(Some(status));
        }
        if Instant::now() >= deadline {
            kill_group(child);
            let _ = child.kill();
            let _ = child.wait();
            return Ok(None);
        }
        thread::sleep(Duration::from_millis(5));
    }
}

// Adapters run in their own process group so a timeout also reaches
// grandchildren, which would otherwise keep the output pipes open.
#[cfg(unix)]
fn kill_group(child: &std::process::Child) {
    if let Ok(pid) = libc::pid_t::try_from(child.id()) {
        // SAFETY: plain syscall on a process group we created.
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
}

#[cfg(not(unix))]
fn kill_group(_child: &std::process::Child) {}

/// Runs an adapter with explicit placeholder values and validates its output.
pub fn run_invocation(spec: &AdapterSpec, inv: &Invocation) -> Result<RunOutput, AdapterError> {
    let words = render_command(spec, inv)?;
    let (program, args) = words.split_first().ok_or_else(|| AdapterError::InvalidSpec {
        name: spec.name.clone(),
        message: "empty command".into(),
    })?;
    fs::create_dir_all(&inv.output_dir).map_err(|source| AdapterError::Io { path: inv.output_dir.display().to_string(), source })?;
    let started = Instant::now();
    let mut command = Command::new(program);
    #[cfg(unix)]
    std::os::unix::process::CommandExt::process_group(&mut command, 0);
    let mut child = command
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| AdapterError::Spawn { name: spec.name.clone(), source })?;
    let out_reader = drain(child.stdout.take());
    let err_reader = drain(child.stderr.take());
    let status = wait_with_timeout(&mut child, Duration::from_secs(spec.timeout_s))
        .map_err(|source| AdapterError::Spawn { name: spec.name.clone(), source })?;
    let _ = out_reader.join();
    let stderr = err_reader.join().unwrap_or_default();
    let Some(status) = status else {
        return Err(AdapterError::Timeout { name: spec.name.clone(), timeout_s: spec.timeout_s, stderr });
    };
    if !status.success() {
        return Err(AdapterError::Failed { name: spec.name.clone(), exit_code: status.code(), stderr });
    }
    let artifacts = verify_artifacts(&spec.produces, &inv.output_dir)?;
    Ok(RunOutput { artifacts, stderr, elapsed: started.elapsed() })
}

/// Runs an adapter on a generation job, writing `{output_dir}/job.json` first.
pub fn run_adapter(spec: &AdapterSpec, job: &GenerationJob) -> Result<ArtifactSet, AdapterError> {
    run_adapter_in(spec, job, &job.output_dir).map(|out| out.artifacts)
}

/// Like [`run_adapter`] but with `{output_dir}` pointing at `dir`.
pub fn run_adapter_in(spec: &AdapterSpec, job: &GenerationJob, dir: &Path) -> Result<RunOutput, AdapterError> {
    let inv = Invocation::for_job(job, dir);
    fs::create_dir_all(dir).map_err(|source| AdapterError::Io { path: dir.display().to_string(), source })?;
    let job_file = inv.job_file.as_ref().expect("job invocation has a job file");
    let json = serde_json::to_vec_pretty(job).expect("job serializes");
    fs::write(job_file, json).map_err(|source| AdapterError::Io { path: job_file.display().to_string(), source })?;
    run_invocation(spec, &inv)
}
