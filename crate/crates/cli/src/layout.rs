//! On-disk layout of a run directory.

use std::path::{Path, PathBuf};

use lipleak::setups::job_output_dir;
use lipleak::GenerationJob;

pub fn grid_file(out: &Path) -> PathBuf {
    out.join("grid.json")
}

pub fn jobs_file(out: &Path) -> PathBuf {
    out.join("jobs.jsonl")
}

pub fn generate_meta_file(out: &Path) -> PathBuf {
    out.join("generate.json")
}

pub fn metrics_meta_file(out: &Path) -> PathBuf {
    out.join("metrics.json")
}

pub fn run_log(out: &Path) -> PathBuf {
    out.join("run_log.jsonl")
}

pub fn records_file(out: &Path) -> PathBuf {
    out.join("records.jsonl")
}

pub fn report_dir(out: &Path) -> PathBuf {
    out.join("report")
}

/// Extractor output for a generated clip, mirroring the generation tree.
pub fn features_dir(out: &Path, job: &GenerationJob) -> PathBuf {
    let gen = job_output_dir(Path::new(""), &job.method_name, job.setup, &job.reference, &job.clip_id);
    let rel = gen.strip_prefix("generated").unwrap_or(&gen).to_path_buf();
    out.join("features").join(rel)
}

/// Extractor output for the ground-truth clip.
pub fn gt_features_dir(out: &Path, clip_id: &str) -> PathBuf {
    out.join("gt_features").join(clip_id)
}

/// Staging root; `LIPLEAK_TMPDIR` overrides the default under the run directory.
pub fn staging_root(out: &Path) -> PathBuf {
    match std::env::var_os("LIPLEAK_TMPDIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => out.join(".staging"),
    }
}
