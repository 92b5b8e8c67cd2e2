//! Subcommands with no long-running work: validate, grid, report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use lipleak::manifest::{load_manifest, parse_manifest, validate_clip, ManifestError};
use lipleak::report::{read_records, render, Format, Report, ReportError};
use lipleak::setups::{build_setup_grid, write_job_manifest, GridMethod, MethodSpec, PairingMap, SetupError, SilenceKind};
use lipleak::SetupKind;
use serde::{Deserialize, Serialize};

use crate::{args, domain, env, layout, CmdResult, Failure, GridArgs, ReportArgs};

/// Grid parameters persisted for the later stages.
#[derive(Serialize, Deserialize)]
pub struct GridFile {
    pub manifest: PathBuf,
    pub seed: u64,
    pub silence: SilenceKind,
    pub methods: Vec<GridMethod>,
    pub adapters: BTreeMap<String, String>,
    pub pairing: PairingMap,
    pub counts: BTreeMap<String, usize>,
}

impl GridFile {
    pub fn load(out: &Path) -> Result<Self, Failure> {
        let path = layout::grid_file(out);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {} (run `lipleak grid` first)", path.display())).map_err(env)?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(env)
    }

    pub fn metadata(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("manifest".into(), self.manifest.display().to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("silence".into(), serde_json::to_string(&self.silence).expect("serializes"));
        let pairs: Vec<String> = self.pairing.pairs.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        m.insert("pairing".into(), pairs.join(" "));
        for method in &self.methods {
            m.insert(format!("method.{}.ar_detail", method.name), method.ar_detail.to_string());
        }
        for (name, template) in &self.adapters {
            m.insert(format!("adapter.{name}"), template.clone());
        }
        m
    }
}

pub fn validate(manifest: &Path) -> CmdResult {
    let parsed = parse_manifest(manifest).map_err(|e| match e {
        ManifestError::Io { .. } | ManifestError::Malformed { .. } => env(e),
        other => domain(other),
    })?;
    let mut invalid = 0;
    for clip in &parsed.clips {
        let report = validate_clip(clip);
        if !report.is_valid() {
            invalid += 1;
        }
        println!("{report}");
    }
    println!("{} clips, {} invalid", parsed.clips.len(), invalid);
    if invalid > 0 {
        return Err(domain(anyhow!("{invalid} invalid clip(s)")));
    }
    Ok(())
}

pub fn grid(a: &GridArgs) -> CmdResult {
    let adapters = args::name_values(&a.adapters).map_err(env)?;
    let mut ar = args::name_values(&a.ar_details).map_err(env)?;
    let silence = args::silence(&a.silence).map_err(env)?;
    let mut methods = Vec::new();
    for name in adapters.keys() {
        let detail = ar.remove(name).map(|d| args::ar_detail(&d)).transpose().map_err(env)?;
        methods.push(MethodSpec::new(name.clone(), detail));
    }
    if let Some(unknown) = ar.keys().next() {
        return Err(env(anyhow!("--ar-detail names unknown method {unknown:?}")));
    }
    let manifest = load_manifest(&a.manifest).map_err(|e| match e {
        ManifestError::Io { .. } | ManifestError::Malformed { .. } => env(e),
        other => domain(other),
    })?;
    fs::create_dir_all(&a.output_dir).with_context(|| format!("creating {}", a.output_dir.display())).map_err(env)?;
    let grid = build_setup_grid(&manifest, &methods, a.seed, &a.output_dir, silence).map_err(|e| match e {
        SetupError::Io { .. } => env(e),
        other => domain(other),
    })?;
    write_job_manifest(&layout::jobs_file(&a.output_dir), &grid.jobs).map_err(env)?;
    let counts: BTreeMap<String, usize> = SetupKind::ALL.iter().map(|&s| (s.to_string(), grid.count(s))).collect();
    let file = GridFile {
        manifest: fs::canonicalize(&a.manifest).unwrap_or_else(|_| a.manifest.clone()),
        seed: a.seed,
        silence,
        methods: grid.methods.clone(),
        adapters,
        pairing: grid.pairing.clone(),
        counts: counts.clone(),
    };
    let json = serde_json::to_string_pretty(&file).expect("grid file serializes") + "\n";
    fs::write(layout::grid_file(&a.output_dir), json).map_err(env)?;
    for (setup, n) in &counts {
        println!("{setup}: {n} jobs");
    }
    println!("total: {} jobs -> {}", grid.jobs.len(), layout::jobs_file(&a.output_dir).display());
    Ok(())
}

fn read_meta(path: &Path, prefix: &str, into: &mut BTreeMap<String, String>) -> CmdResult {
    if !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(path).map_err(env)?;
    let map: BTreeMap<String, String> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(env)?;
    into.extend(map.into_iter().map(|(k, v)| (format!("{prefix}{k}"), v)));
    Ok(())
}

pub fn report(a: &ReportArgs) -> CmdResult {
    let format: Format = a.format.parse().map_err(|e: String| env(anyhow!(e)))?;
    let records_path = a.records.clone().unwrap_or_else(|| layout::records_file(&a.output_dir));
    let records = read_records(&records_path).map_err(|e| match e {
        ReportError::Io { .. } | ReportError::Malformed { .. } => env(e),
        other => domain(other),
    })?;
    let mut metadata = BTreeMap::new();
    if layout::grid_file(&a.output_dir).exists() {
        metadata.extend(GridFile::load(&a.output_dir)?.metadata().into_iter().map(|(k, v)| (format!("grid.{k}"), v)));
    }
    read_meta(&layout::generate_meta_file(&a.output_dir), "generate.", &mut metadata)?;
    read_meta(&layout::metrics_meta_file(&a.output_dir), "metrics.", &mut metadata)?;
    let report = Report::build(&records, metadata).map_err(domain)?;
    let dir = layout::report_dir(&a.output_dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display())).map_err(env)?;
    for f in [Format::Delimited, Format::Structured, Format::Human] {
        let path = dir.join(format!("report.{}", f.extension()));
        fs::write(&path, render(&report, f)).with_context(|| format!("writing {}", path.display())).map_err(env)?;
    }
    print!("{}", render(&report, format));
    Ok(())
}
