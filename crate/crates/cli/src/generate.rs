//! `generate`: runs the generator adapter and then the feature extractor for
//! every job, plus the extractor over each ground-truth clip.
//!
//! Each task works in a private staging directory and is moved into the run
//! tree only after every declared artifact validated, so an interrupted run
//! never leaves a half-written job that a rerun would mistake for complete.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use anyhow::{anyhow, Context};
use lipleak::adapter::{run_adapter_in, run_invocation, verify_artifacts, AdapterError, AdapterSpec, ArtifactKind, Invocation};
use lipleak::manifest::{load_manifest, ManifestError};
use lipleak::setups::read_job_manifest;
use lipleak::{ClipEntry, GenerationJob, SetupKind};
use serde::Serialize;

use crate::commands::GridFile;
use crate::{args, domain, env, layout, CmdResult, GenerateArgs};

enum Task<'a> {
    GroundTruth(&'a ClipEntry),
    Job { job: &'a GenerationJob, clip: &'a ClipEntry },
}

impl Task<'_> {
    fn id(&self) -> String {
        match self {
            Task::GroundTruth(clip) => format!("gt/{}", clip.clip_id),
            Task::Job { job, .. } => job.job_id(),
        }
    }
}

#[derive(Serialize)]
struct LogEntry {
    job: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exit_code: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stderr: Option<String>,
    elapsed_ms: u128,
}

struct StageError {
    stage: &'static str,
    error: anyhow::Error,
    exit_code: Option<i32>,
    stderr: Option<String>,
}

fn stage_err(stage: &'static str) -> impl Fn(AdapterError) -> StageError {
    move |e| {
        let (exit_code, stderr) = match &e {
            AdapterError::Failed { exit_code, stderr, .. } => (*exit_code, Some(stderr.clone())),
            AdapterError::Timeout { stderr, .. } => (None, Some(stderr.clone())),
            _ => (None, None),
        };
        StageError { stage, error: e.into(), exit_code, stderr }
    }
}

fn io_stage(stage: &'static str) -> impl Fn(anyhow::Error) -> StageError {
    move |error| StageError { stage, error, exit_code: None, stderr: None }
}

fn copy_dir(src: &Path, dst: &Path) -> io::Result<()> {
    fs::create_dir_all(dst)?;
    for entry in fs::read_dir(src)? {
        let entry = entry?;
        let target = dst.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copy_dir(&entry.path(), &target)?;
        } else {
            fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

/// Replaces `dst` with `src`, falling back to a copy across filesystems.
fn install(src: &Path, dst: &Path) -> anyhow::Result<()> {
    if dst.exists() {
        fs::remove_dir_all(dst).with_context(|| format!("removing stale {}", dst.display()))?;
    }
    if let Some(parent) = dst.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    if fs::rename(src, dst).is_err() {
        copy_dir(src, dst).with_context(|| format!("copying {} to {}", src.display(), dst.display()))?;
        fs::remove_dir_all(src).ok();
    }
    Ok(())
}

fn fresh_dir(path: &Path) -> anyhow::Result<()> {
    if path.exists() {
        fs::remove_dir_all(path).with_context(|| format!("clearing {}", path.display()))?;
    }
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

struct Runner<'a> {
    out: &'a Path,
    staging: PathBuf,
    generators: BTreeMap<String, AdapterSpec>,
    extractor: AdapterSpec,
}

fn staging_name(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

impl Runner<'_> {
    fn is_complete(&self, task: &Task) -> bool {
        match task {
            Task::GroundTruth(clip) => verify_artifacts(&self.extractor.produces, &layout::gt_features_dir(self.out, &clip.clip_id)).is_ok(),
            Task::Job { job, .. } => {
                verify_artifacts(&BTreeSet::from([ArtifactKind::GeneratedFrames]), &job.output_dir).is_ok()
                    && verify_artifacts(&self.extractor.produces, &layout::features_dir(self.out, job)).is_ok()
            }
        }
    }

    fn execute(&self, task: &Task) -> Result<(), StageError> {
        let stage = self.staging.join(staging_name(&task.id()));
        fresh_dir(&stage).map_err(io_stage("stage"))?;
        let result = self.execute_in(task, &stage);
        fs::remove_dir_all(&stage).ok();
        result
    }

    fn execute_in(&self, task: &Task, stage: &Path) -> Result<(), StageError> {
        let feat = stage.join("features");
        match task {
            Task::GroundTruth(clip) => {
                let clip_file = stage.join("clip.json");
                fs::write(&clip_file, serde_json::to_vec_pretty(clip).expect("clip serializes"))
                    .map_err(|e| io_stage("stage")(e.into()))?;
                let inv = Invocation {
                    input_frames: Some(clip.frame_dir.clone()),
                    input_audio: Some(clip.audio_path.clone()),
                    reference_spec: Some("CR".into()),
                    output_dir: feat.clone(),
                    job_file: Some(clip_file),
                };
                run_invocation(&self.extractor, &inv).map_err(stage_err("extract"))?;
                install(&feat, &layout::gt_features_dir(self.out, &clip.clip_id)).map_err(io_stage("install"))
            }
            Task::Job { job, clip } => {
                let gen = stage.join("generated");
                let spec = &self.generators[&job.method_name];
                run_adapter_in(spec, job, &gen).map_err(stage_err("generate"))?;
                // Silent-input outputs are scored against the speech the model never heard.
                let eval_audio = match job.setup {
                    SetupKind::SilentInput => clip.audio_path.clone(),
                    _ => job.driving_audio_path.clone(),
                };
                let inv = Invocation {
                    input_frames: Some(gen.join(ArtifactKind::GeneratedFrames.file_name())),
                    input_audio: Some(eval_audio),
                    reference_spec: Some(job.reference.to_string()),
                    output_dir: feat.clone(),
                    job_file: Some(gen.join("job.json")),
                };
                run_invocation(&self.extractor, &inv).map_err(stage_err("extract"))?;
                install(&gen, &job.output_dir).map_err(io_stage("install"))?;
                install(&feat, &layout::features_dir(self.out, job)).map_err(io_stage("install"))
            }
        }
    }
}

fn parse_produces(text: &str) -> anyhow::Result<BTreeSet<ArtifactKind>> {
    let mut out = BTreeSet::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind: ArtifactKind = item.parse().map_err(|e: String| anyhow!(e))?;
        if kind == ArtifactKind::GeneratedFrames {
            anyhow::bail!("the extractor cannot produce generated_frames");
        }
        out.insert(kind);
    }
    Ok(out)
}

pub fn run(a: &GenerateArgs) -> CmdResult {
    if a.parallelism == 0 {
        return Err(env(anyhow!("--parallelism must be at least 1")));
    }
    let out = a.output_dir.as_path();
    let grid = GridFile::load(out)?;
    let manifest = load_manifest(&grid.manifest).map_err(|e| match e {
        ManifestError::Io { .. } | ManifestError::Malformed { .. } => env(e),
        other => domain(other),
    })?;
    let jobs = read_job_manifest(&layout::jobs_file(out)).map_err(env)?;

    let mut templates = grid.adapters.clone();
    templates.extend(args::name_values(&a.adapters).map_err(env)?);
    let mut generators = BTreeMap::new();
    for (name, template) in &templates {
        let spec = AdapterSpec::new(name.clone(), template.clone(), [ArtifactKind::GeneratedFrames], a.timeout);
        spec.validate().map_err(env)?;
        generators.insert(name.clone(), spec);
    }
    let extractor = AdapterSpec::new("extractor", a.extractor.clone(), parse_produces(&a.extractor_produces).map_err(env)?, a.timeout);
    extractor.validate().map_err(env)?;

    let mut tasks: Vec<Task> = manifest.clips.iter().map(Task::GroundTruth).collect();
    for job in &jobs {
        if !generators.contains_key(&job.method_name) {
            return Err(env(anyhow!("no adapter for method {:?}", job.method_name)));
        }
        let clip = manifest.get(&job.clip_id).ok_or_else(|| env(anyhow!("job {} names a clip missing from the manifest", job.job_id())))?;
        tasks.push(Task::Job { job, clip });
    }

    let meta = BTreeMap::from([
        ("extractor".to_string(), a.extractor.clone()),
        ("extractor_produces".to_string(), extractor.produces.iter().map(|k| k.name()).collect::<Vec<_>>().join(",")),
        ("timeout_s".to_string(), a.timeout.to_string()),
    ]);
    fs::write(layout::generate_meta_file(out), serde_json::to_string_pretty(&meta).expect("serializes") + "\n").map_err(env)?;

    let runner = Runner { out, staging: layout::staging_root(out), generators, extractor };
    let log_path = layout::run_log(out);
    let log = fs::OpenOptions::new().create(true).append(true).open(&log_path).with_context(|| format!("opening {}", log_path.display())).map_err(env)?;
    let state = Mutex::new((log, Vec::<String>::new(), 0usize, 0usize));
    let next = AtomicUsize::new(0);

    thread::scope(|s| {
        for _ in 0..a.parallelism.min(tasks.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(i) else { break };
                let id = task.id();
                let started = Instant::now();
                let mut entry = LogEntry { job: id.clone(), status: "ok", stage: None, exit_code: None, error: None, stderr: None, elapsed_ms: 0 };
                if runner.is_complete(task) {
                    entry.status = "skipped";
                } else if let Err(e) = runner.execute(task) {
                    entry.status = "failed";
                    entry.stage = Some(e.stage);
                    entry.exit_code = e.exit_code;
                    entry.error = Some(format!("{:#}", e.error));
                    entry.stderr = e.stderr;
                }
                entry.elapsed_ms = started.elapsed().as_millis();
                let mut line = serde_json::to_vec(&entry).expect("log entry serializes");
                line.push(b'\n');
                let mut st = state.lock().expect("log lock");
                if let Err(e) = st.0.write_all(&line) {
                    eprintln!("warning: cannot append to {}: {e}", log_path.display());
                }
                match entry.status {
                    "failed" => {
                        eprintln!("FAILED {id}: {}", entry.error.as_deref().unwrap_or(""));
                        st.1.push(id);
                    }
                    "skipped" => st.3 += 1,
                    _ => {
                        println!("done {id}");
                        st.2 += 1;
                    }
                }
            });
        }
    });

    let (_, mut failed, ran, skipped) = state.into_inner().expect("log lock");
    println!("{ran} executed, {skipped} already complete, {} failed", failed.len());
    if failed.is_empty() {
        return Ok(());
    }
    failed.sort();
    Err(domain(anyhow!("failed jobs: {}", failed.join(", "))))
}
