//! `metrics`: scores every generated clip and writes the record store.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use anyhow::{anyhow, bail, Context};
use lipleak::adapter::ArtifactKind;
use lipleak::embt::read_embedding_track_of;
use lipleak::frames::{frame_size, list_frames, load_frames};
use lipleak::landmark_file::read_landmark_track;
use lipleak::manifest::{load_manifest, ManifestError};
use lipleak::model::CORPUS_CLIP;
use lipleak::report::{append_records, metric};
use lipleak::setups::read_job_manifest;
use lipleak::sync::{lse, lse_silent};
use lipleak::visual::frechet::REGULARIZATION;
use lipleak::visual::identity::csim_against;
use lipleak::visual::{csim_tracks, fit_gaussian_pooled, frechet_distance, lmd, psnr, ssim, LmdOptions, Region, PSNR_CAP_DB};
use lipleak::{
    ArDetail, ClipEntry, GenerationJob, MetricRecord, ReferenceStrategy, SetupKind, SsimParams64, Track32, Track64, TrackKind,
};

use crate::commands::GridFile;
use crate::{domain, env, layout, CmdResult, MetricsArgs};

const ALL: [&str; 7] = ["lse", "ssim", "psnr", "fid", "csim", "csim_ref", "lmd"];

struct Settings {
    enabled: BTreeSet<&'static str>,
    max_offset: usize,
    region: Region,
    lmd: LmdOptions,
    ssim: SsimParams64,
}

impl Settings {
    fn on(&self, name: &str) -> bool {
        self.enabled.contains(name)
    }
}

#[derive(Default)]
struct JobOutput {
    records: Vec<MetricRecord>,
    problems: Vec<String>,
    distribution: Option<Track32>,
    lmd_excluded: usize,
}

fn record(job: &GenerationJob, name: &str, value: f64) -> MetricRecord {
    MetricRecord {
        method_name: job.method_name.clone(),
        clip_id: job.clip_id.clone(),
        setup: job.setup,
        reference: job.reference.clone(),
        metric_name: name.into(),
        value,
    }
}

fn track(dir: &Path, kind: ArtifactKind) -> anyhow::Result<Track64> {
    let path = dir.join(kind.file_name());
    let t = read_embedding_track_of(&path, kind.track_kind().expect("embedding kind")).with_context(|| path.display().to_string())?;
    Ok(t.cast())
}

fn frame_scores(job: &GenerationJob, clip: &ClipEntry, s: &Settings) -> anyhow::Result<(f64, f64)> {
    let n = job.effective_frame_count as usize;
    let gen = load_frames(&job.output_dir.join(ArtifactKind::GeneratedFrames.file_name()), Some(n))?;
    let gt = load_frames(&clip.frame_dir, Some(n))?;
    let m = gen.len().min(gt.len());
    if m == 0 {
        bail!("no frames to compare");
    }
    let (mut ssim_sum, mut psnr_sum) = (0.0, 0.0);
    for (g, t) in gen.iter().zip(&gt).take(m) {
        let (g, t) = (s.region.apply(g), s.region.apply(t));
        if s.on("ssim") {
            ssim_sum += ssim(&g, &t, &s.ssim)?;
        }
        if s.on("psnr") {
            psnr_sum += psnr::<f64>(&g, &t)?;
        }
    }
    Ok((ssim_sum / m as f64, psnr_sum / m as f64))
}

fn reference_identity(gt: &Track64, detail: &ArDetail) -> Option<Vec<f64>> {
    let k = match detail {
        ArDetail::FirstFrame => 1,
        ArDetail::MultiFrame(k) => *k as usize,
        ArDetail::RandomFrame | ArDetail::Custom(_) => return None,
    };
    let k = k.min(gt.count());
    if k == 0 {
        return None;
    }
    let mut mean = vec![0.0; gt.dim()];
    for row in gt.rows().take(k) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / k as f64);
    }
    Some(mean)
}

fn score_job(out: &Path, job: &GenerationJob, clip: &ClipEntry, s: &Settings) -> JobOutput {
    let mut o = JobOutput::default();
    let feat = layout::features_dir(out, job);
    let gt_feat = layout::gt_features_dir(out, &clip.clip_id);
    let n = job.effective_frame_count as usize;
    let problem = |o: &mut JobOutput, what: &str, e: anyhow::Error| o.problems.push(format!("{} {what}: {e:#}", job.job_id()));

    if s.on("lse") {
        let scored = (|| {
            let v = track(&feat, ArtifactKind::VisualSync)?;
            let a = track(&feat, ArtifactKind::AudioSync)?;
            Ok::<_, anyhow::Error>(match job.setup {
                SetupKind::SilentInput => lse_silent(&v, &a, s.max_offset)?,
                _ => lse(&v, &a, s.max_offset)?,
            })
        })();
        match scored {
            Ok(sc) => {
                o.records.push(record(job, metric::LSE_C, sc.lse_c));
                o.records.push(record(job, metric::LSE_D, sc.lse_d));
            }
            Err(e) => problem(&mut o, "lse", e),
        }
    }
    if s.on("ssim") || s.on("psnr") {
        match frame_scores(job, clip, s) {
            Ok((ss, ps)) => {
                if s.on("ssim") {
                    o.records.push(record(job, metric::SSIM, ss));
                }
                if s.on("psnr") {
                    o.records.push(record(job, metric::PSNR, ps));
                }
            }
            Err(e) => problem(&mut o, "ssim/psnr", e),
        }
    }
    if s.on("csim") || s.on("csim_ref") {
        let tracks = track(&feat, ArtifactKind::Identity).and_then(|g| Ok((g, track(&gt_feat, ArtifactKind::Identity)?)));
        match tracks {
            Ok((gen, gt)) => {
                if s.on("csim") {
                    match csim_tracks(&gen, &gt) {
                        Ok(v) => o.records.push(record(job, metric::CSIM, v)),
                        Err(e) => problem(&mut o, "csim", e.into()),
                    }
                }
                if s.on("csim_ref") {
                    let value = match &job.reference {
                        ReferenceStrategy::Current => Some(csim_tracks(&gen, &gt)),
                        ReferenceStrategy::Alternative(d) => reference_identity(&gt, d).map(|r| csim_against(&gen, &r)),
                    };
                    match value {
                        Some(Ok(v)) => o.records.push(record(job, metric::CSIM_REF, v)),
                        Some(Err(e)) => problem(&mut o, "csim_ref", e.into()),
                        None => {}
                    }
                }
            }
            Err(e) => problem(&mut o, "csim", e),
        }
    }
    if s.on("lmd") && job.setup == SetupKind::AudioMatched {
        let scored = (|| {
            let path = feat.join(ArtifactKind::Landmarks.file_name());
            let gen = read_landmark_track(&path).with_context(|| path.display().to_string())?;
            let path = gt_feat.join(ArtifactKind::Landmarks.file_name());
            let gt = read_landmark_track(&path).with_context(|| path.display().to_string())?;
            let m = n.min(gen.frame_count()).min(gt.frame_count());
            Ok::<_, anyhow::Error>(lmd(&gen.truncated(m), &gt.truncated(m), &s.lmd)?)
        })();
        match scored {
            Ok(sc) => {
                o.records.push(record(job, metric::LMD, f64::from(sc.distance)));
                o.lmd_excluded += sc.frames_excluded;
            }
            Err(e) => problem(&mut o, "lmd", e),
        }
    }
    if s.on("fid") {
        let path = feat.join(ArtifactKind::Distribution.file_name());
        match read_embedding_track_of(&path, TrackKind::Distribution) {
            Ok(t) => o.distribution = Some(t.truncated(n.min(t.count()))),
            Err(e) => problem(&mut o, "fid", anyhow::Error::from(e).context(path.display().to_string())),
        }
    }
    o
}

fn parse_settings(a: &MetricsArgs) -> anyhow::Result<Settings> {
    let mut enabled = BTreeSet::new();
    for item in a.metrics.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let name = ALL.iter().find(|m| **m == item).ok_or_else(|| anyhow!("unknown metric {item:?}; choose from {}", ALL.join(",")))?;
        enabled.insert(*name);
    }
    if enabled.is_empty() {
        bail!("no metrics selected");
    }
    if a.max_offset == 0 {
        bail!("--max-offset must be at least 1");
    }
    if a.parallelism == 0 {
        bail!("--parallelism must be at least 1");
    }
    let region = match a.region_mask.as_str() {
        "full" => Region::Full,
        "lower-half" => Region::LowerHalf,
        other => bail!("unknown region mask {other:?} (full, lower-half)"),
    };
    Ok(Settings {
        enabled,
        max_offset: a.max_offset,
        region,
        lmd: LmdOptions { normalize: a.lmd_normalize, ..LmdOptions::default() },
        ssim: SsimParams64::default(),
    })
}

pub fn run(a: &MetricsArgs) -> CmdResult {
    let s = parse_settings(a).map_err(env)?;
    let out = a.output_dir.as_path();
    let grid = GridFile::load(out)?;
    let manifest = load_manifest(&grid.manifest).map_err(|e| match e {
        ManifestError::Io { .. } | ManifestError::Malformed { .. } => env(e),
        other => domain(other),
    })?;
    let jobs = read_job_manifest(&layout::jobs_file(out)).map_err(env)?;
    let clips: Vec<&ClipEntry> = jobs
        .iter()
        .map(|j| manifest.get(&j.clip_id).ok_or_else(|| env(anyhow!("job {} names a clip missing from the manifest", j.job_id()))))
        .collect::<Result<_, _>>()?;
    if s.on("lmd") {
        println!("note: lmd is computed for AM jobs only; XM and SI jobs are skipped");
    }

    let results: Mutex<Vec<Option<JobOutput>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    thread::scope(|sc| {
        for _ in 0..a.parallelism.min(jobs.len().max(1)) {
            sc.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = score_job(out, &jobs[i], clips[i], &s);
                results.lock().expect("results lock")[i] = Some(r);
            });
        }
    });
    let results: Vec<JobOutput> = results.into_inner().expect("results lock").into_iter().map(|r| r.expect("every job scored")).collect();

    let mut records = Vec::new();
    let mut problems = Vec::new();
    let mut lmd_excluded = 0;
    let mut regularized = Vec::new();
    let mut pools: BTreeMap<(String, SetupKind, ReferenceStrategy), Vec<Track64>> = BTreeMap::new();
    for (job, r) in jobs.iter().zip(results) {
        records.extend(r.records);
        problems.extend(r.problems);
        lmd_excluded += r.lmd_excluded;
        if let Some(t) = r.distribution {
            pools.entry((job.method_name.clone(), job.setup, job.reference.clone())).or_default().push(t.cast());
        }
    }
    if s.on("fid") {
        let mut gt_pool = Vec::new();
        for clip in &manifest.clips {
            let path = layout::gt_features_dir(out, &clip.clip_id).join(ArtifactKind::Distribution.file_name());
            match read_embedding_track_of(&path, TrackKind::Distribution) {
                Ok(t) => gt_pool.push(t.cast::<f64>()),
                Err(e) => problems.push(format!("gt/{} fid: {}: {e}", clip.clip_id, path.display())),
            }
        }
        match fit_gaussian_pooled(&gt_pool) {
            Err(e) => problems.push(format!("fid: ground-truth fit: {e}")),
            Ok(gt_fit) => {
                for ((method, setup, reference), tracks) in &pools {
                    match fit_gaussian_pooled(tracks).and_then(|g| frechet_distance(&g, &gt_fit)) {
                        Ok(score) => {
                            if score.regularized {
                                regularized.push(format!("{method}/{setup}/{}", reference.kind()));
                            }
                            records.push(MetricRecord {
                                method_name: method.clone(),
                                clip_id: CORPUS_CLIP.into(),
                                setup: *setup,
                                reference: reference.clone(),
                                metric_name: metric::FID.into(),
                                value: score.distance,
                            })
                        }
                        Err(e) => problems.push(format!("{method}/{CORPUS_CLIP}/{setup}/{} fid: {e}", reference.kind())),
                    }
                }
            }
        }
    }

    let path = layout::records_file(out);
    let tmp = path.with_extension("jsonl.tmp");
    fs::remove_file(&tmp).ok();
    append_records(&tmp, &records).map_err(env)?;
    fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display())).map_err(env)?;

    let ssim_desc = format!(
        "window={} sigma={} k1={} k2={} range={}",
        s.ssim.window, s.ssim.sigma, s.ssim.k1, s.ssim.k2, s.ssim.dynamic_range
    );
    let mut sizes = BTreeSet::new();
    for clip in &manifest.clips {
        if let Some(size) = list_frames(&clip.frame_dir).ok().and_then(|f| f.first().and_then(|p| frame_size(p).ok())) {
            sizes.insert(format!("{}x{}", size.0, size.1));
        }
    }
    let mut meta = BTreeMap::from([
        ("frame_size".to_string(), sizes.into_iter().collect::<Vec<_>>().join(",")),
        ("psnr_cap_db".to_string(), PSNR_CAP_DB.to_string()),
        ("enabled".to_string(), s.enabled.iter().copied().collect::<Vec<_>>().join(",")),
        ("max_offset".to_string(), s.max_offset.to_string()),
        ("region_mask".to_string(), s.region.name().to_string()),
        ("ssim".to_string(), ssim_desc),
        ("lmd_normalize".to_string(), s.lmd.normalize.to_string()),
        ("fid".to_string(), "per method, setup and reference; generated frames pooled over clips vs all ground-truth frames".to_string()),
        ("csim_target".to_string(), "csim: ground-truth frame at the same index; csim_ref: reference image embedding".to_string()),
    ]);
    if s.on("lmd") {
        meta.insert("lmd_frames_excluded".into(), lmd_excluded.to_string());
    }
    if s.on("fid") {
        let note = if regularized.is_empty() { "none".to_string() } else { regularized.join(" ") };
        meta.insert("fid_regularized".into(), format!("{note} (epsilon {REGULARIZATION} added to near-singular covariances)"));
    }
    fs::write(layout::metrics_meta_file(out), serde_json::to_string_pretty(&meta).expect("serializes") + "\n").map_err(env)?;

    println!("{} records -> {}", records.len(), path.display());
    if problems.is_empty() {
        return Ok(());
    }
    for p in &problems {
        eprintln!("missing: {p}");
    }
    Err(domain(anyhow!("{} metric(s) could not be computed", problems.len())))
}
