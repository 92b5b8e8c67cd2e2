//! Acceptance harness: one PASS/FAIL line per headline criterion.
//!
//! Run with `cargo test -p lipleak-cli --test acceptance`.

#[path = "../../core/tests/support/mod.rs"]
mod support;
mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use image::{Rgb, RgbImage};
use lipleak::embt;
use lipleak::report::append_records;
use lipleak::setups::{derange_pairing, make_silent_audio, SilenceKind};
use lipleak::sync::offset_distance_profile;
use lipleak::visual::{frechet_distance, psnr, ssim, GaussianFit, SsimParams, PSNR_CAP_DB};
use lipleak::{SsimParams64, TrackKind};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use support::*;

const LSD_TOL: f64 = 0.01;
const SYNC_PAIRS: usize = 1000;
const SYNC_REL_TOL: f64 = 1e-5;
const FRECHET_CLOSED_TOL: f64 = 1e-9;
const FRECHET_ROT_TOL: f64 = 1e-6;
const SSIM_TOL: f64 = 1e-6;
const PAIRING_CASES: usize = 500;
const EMBT_TRACKS: usize = 200;
const SEPARATION: f64 = 2.0;

type Check = fn() -> Result<Outcome>;

enum Outcome {
    Pass(String),
    Substituted(String),
}

fn lsd_reconstruction() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let store = dir.path().join("published.jsonl");
    append_records(&store, &published_sync_records())?;
    let out = dir.path().join("out");
    let r = common::report(&out, &["--records", common::p(&store), "--format", "csv"]);
    ensure!(common::code(&r) == 0, "report exited {}: {}", common::code(&r), common::stderr(&r));
    let csv = common::csv_values(&out.join("report/report.csv"));
    let mut worst: f64 = 0.0;
    for (method, printed) in PUBLISHED_LEAKAGE {
        for (reference, target) in [("CR", printed[2]), ("AR", printed[3])] {
            let key = ("leakage".to_string(), method.to_string(), "AM-XM".to_string(), reference.to_string(), "lsd".to_string());
            let got: f64 = csv.get(&key).with_context(|| format!("{method} LSD-{reference} missing"))?.parse()?;
            let err = (got - target).abs();
            ensure!(err <= LSD_TOL + 1e-12, "{method} LSD-{reference}: {got} vs printed {target}");
            worst = worst.max(err);
        }
    }
    Ok(Outcome::Pass(format!("12 LSD cells within ±{LSD_TOL} (max |err| {worst:.4})")))
}

fn full_reproduction() -> Result<Outcome> {
    Ok(Outcome::Substituted(
        "the raw published scores need LRS2, six pretrained generators and pretrained extractors; covered by the suites below".into(),
    ))
}

fn sync_oracle() -> Result<Outcome> {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for i in 0..SYNC_PAIRS {
        let w = r.random_range(1..=15);
        let t_len = r.random_range(2 * w + 1..=200);
        let dim = r.random_range(1..=128);
        let a_len = r.random_range(2 * w + 1..=200);
        let (v, a) = (random_rows(&mut r, t_len, dim), random_rows(&mut r, a_len, dim));
        let want = profile_oracle(&v, &a, w);
        let got = offset_distance_profile(&track32(TrackKind::VisualSync, &v), &track32(TrackKind::AudioSync, &a), w)?;
        for (g, o) in got.distances().iter().zip(&want) {
            let e = rel_err(f64::from(*g), *o);
            ensure!(e <= SYNC_REL_TOL, "pair {i}: relative error {e:e}");
            worst = worst.max(e);
        }
    }
    let mut shifts = 0;
    for w in 1..=15usize {
        for k in -(w as i64)..=w as i64 {
            let t_len = 40 + r.random_range(0..60);
            let (v, a) = shifted_pair(&mut r, t_len, 16, w, k);
            let p = offset_distance_profile(&track64(TrackKind::VisualSync, &v), &track64(TrackKind::AudioSync, &a), w)?;
            ensure!(p.argmin() == -k as isize && p.min() == 0.0, "W={w} k={k}: argmin {} min {}", p.argmin(), p.min());
            shifts += 1;
        }
    }
    Ok(Outcome::Pass(format!(
        "{SYNC_PAIRS} pairs (f32 path) max rel err {worst:.2e} ≤ {SYNC_REL_TOL:e}; {shifts} shifts recovered with W in 1..=15"
    )))
}

fn frechet_oracle(m1: &[f64], c1: &[f64], m2: &[f64], c2: &[f64]) -> f64 {
    let d = m1.len();
    let (a, b) = (from_row_major(d, c1), from_row_major(d, c2));
    let cross: f64 = (&a * &b).complex_eigenvalues().iter().map(|z| z.re.max(0.0).sqrt()).sum();
    let mean: f64 = m1.iter().zip(m2).map(|(x, y)| (x - y).powi(2)).sum();
    mean + a.trace() + b.trace() - 2.0 * cross
}

fn frechet_suite() -> Result<Outcome> {
    let g = |m: Vec<f64>, c: Vec<f64>| GaussianFit::new(m, c);
    let same = g(vec![0.5, -1.0], vec![2.0, 0.3, 0.3, 1.0])?;
    ensure!(frechet_distance(&same, &same)?.distance == 0.0, "identical fits not exactly 0");
    let a = frechet_distance(&g(vec![0.0], vec![1.0])?, &g(vec![1.0], vec![1.0])?)?.distance;
    let b = frechet_distance(&g(vec![0.0], vec![4.0])?, &g(vec![0.0], vec![1.0])?)?.distance;
    ensure!((a - 1.0).abs() < FRECHET_CLOSED_TOL && (b - 1.0).abs() < FRECHET_CLOSED_TOL, "1-D cases {a}, {b}");
    let mut r = rng(2);
    let d = 8;
    let (mut worst_rot, mut worst_oracle): (f64, f64) = (0.0, 0.0);
    for i in 0..100 {
        let m = random_rows(&mut r, 2, d);
        let (c1, c2) = (random_spd(&mut r, d), random_spd(&mut r, d));
        let base = frechet_distance(&g(m[0].clone(), c1.clone())?, &g(m[1].clone(), c2.clone())?)?.distance;
        let q = random_rotation(&mut r, d);
        let rot = |mu: &[f64], c: &[f64]| {
            let cm = &q * from_row_major(d, c) * q.transpose();
            let cm: DMatrix<f64> = (&cm + cm.transpose()) * 0.5;
            g((&q * DVector::from_column_slice(mu)).iter().copied().collect(), row_major(&cm))
        };
        let rotated = frechet_distance(&rot(&m[0], &c1)?, &rot(&m[1], &c2)?)?.distance;
        let scale = base.max(1.0);
        let e = (rotated - base).abs() / scale;
        ensure!(e < FRECHET_ROT_TOL, "pair {i}: {base} vs rotated {rotated}");
        worst_rot = worst_rot.max(e);
        worst_oracle = worst_oracle.max((frechet_oracle(&m[0], &c1, &m[1], &c2) - base).abs() / scale);
    }
    ensure!(worst_oracle < FRECHET_ROT_TOL, "eigenvalue-route cross check off by {worst_oracle:e}");
    Ok(Outcome::Pass(format!(
        "identical → 0 exact; 1-D cases within {FRECHET_CLOSED_TOL:e}; 100 rotated 8-D pairs max rel diff {worst_rot:.1e}, product-eigenvalue oracle {worst_oracle:.1e}"
    )))
}

fn ssim_psnr_suite() -> Result<Outcome> {
    let params: SsimParams64 = SsimParams::default();
    for i in 0..4 {
        ensure!(ssim(&pattern(i), &pattern(i), &params)? == 1.0, "ssim(a, a) != 1 for pattern {i}");
        ensure!(psnr::<f64>(&pattern(i), &pattern(i))? == PSNR_CAP_DB, "psnr(a, a) != cap");
    }
    let black = RgbImage::new(16, 16);
    let white = RgbImage::from_pixel(16, 16, Rgb([255; 3]));
    ensure!(psnr::<f64>(&black, &white)? == 0.0, "0 dB case");
    let base = RgbImage::new(8, 5);
    let mut off = base.clone();
    for x in 0..3 {
        off.put_pixel(x, 0, Rgb([51, 0, 0]));
    }
    ensure!(psnr::<f64>(&base, &off)? == 30.0, "30 dB case gave {}", psnr::<f64>(&base, &off)?);
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let e = (ssim(&pattern(i), &pattern(j), &params)? - ssim_oracle(&pattern(i), &pattern(j))).abs();
            ensure!(e < SSIM_TOL, "patterns {i},{j}: {e:e}");
            worst = worst.max(e);
        }
    }
    Ok(Outcome::Pass(format!("identity exact; 0 dB and 30 dB exact; 16 pattern pairs max |Δ| {worst:.1e} < {SSIM_TOL:e}")))
}

fn pairing_suite() -> Result<Outcome> {
    let mut r = rng(3);
    for _ in 0..PAIRING_CASES {
        let (seed, n) = (r.random::<u64>(), r.random_range(2..=200usize));
        let ids: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let p = derange_pairing(&ids, seed)?;
        ensure!(is_derangement(&ids, &p.pairs), "seed {seed} n {n} not a derangement");
        ensure!(derange_pairing(&ids, seed)? == p, "seed {seed} n {n} not reproducible");
    }
    Ok(Outcome::Pass(format!("{PAIRING_CASES} random (seed, n ≤ 200) cases")))
}

fn format_suite() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let mut r = rng(4);
    for i in 0..EMBT_TRACKS {
        let t = random_track32(&mut r);
        let path = dir.path().join(format!("{i}.embt"));
        embt::write_embedding_track(&t, &path)?;
        let back = embt::read_embedding_track(&path)?;
        let same = back.kind() == t.kind()
            && back.dim() == t.dim()
            && back.rate_milli() == t.rate_milli()
            && back.data().len() == t.data().len()
            && back.data().iter().zip(t.data()).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure!(same, "track {i} differs after round trip");
    }
    let t = lipleak::EmbeddingTrack::new(TrackKind::Distribution, 2, 25_000, vec![1.0f32, -1.0])?;
    let clean = embt::encode(&t)?;
    let path = dir.path().join("fuzz.embt");
    let mut corruptions = 0;
    for offset in 0..13 {
        for delta in 1..=255u8 {
            let mut bytes = clean.clone();
            bytes[offset] = bytes[offset].wrapping_add(delta);
            fs::write(&path, &bytes)?;
            ensure!(embt::read_embedding_track_of(&path, TrackKind::Distribution).is_err(), "offset {offset} +{delta} accepted");
            corruptions += 1;
        }
    }
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/silence_640.wav");
    let h = make_silent_audio(0.04, 16_000, &dir.path().join("s.wav"), SilenceKind::Zero)?;
    ensure!(fs::read(&h.path)? == fs::read(&golden)?, "silent WAV differs from golden file");
    Ok(Outcome::Pass(format!("{EMBT_TRACKS} tracks bit-exact; {corruptions} header corruptions rejected; silent WAV golden match")))
}

fn end_to_end() -> Result<Outcome> {
    let started = Instant::now();
    let dir = tempfile::tempdir()?;
    let manifest = common::synth_corpus(dir.path(), 4);
    let out = dir.path().join("out");
    let adapters = [("follow", common::generator("follow", "")), ("leak", common::generator("leak", ""))];
    for (stage, o) in [
        ("grid", common::grid(&manifest, &out, &adapters)),
        ("generate", common::generate(&out, &[])),
        ("metrics", common::metrics(&out, &[])),
        ("report", common::report(&out, &["--format", "csv"])),
    ] {
        ensure!(common::code(&o) == 0, "{stage} exited {}: {}", common::code(&o), common::stderr(&o));
    }
    let csv = common::csv_values(&out.join("report/report.csv"));
    let get = |method: &str, setup: &str, metric: &str| -> Result<f64> {
        let key = ("leakage".to_string(), method.to_string(), setup.to_string(), "CR".to_string(), metric.to_string());
        Ok(csv.get(&key).with_context(|| format!("{method} {metric} missing"))?.parse()?)
    };
    let (lsd_leak, lsd_follow) = (get("leak", "AM-XM", "lsd")?, get("follow", "AM-XM", "lsd")?);
    let (c_leak, c_follow) = (get("leak", "SI", "lse_c_s")?, get("follow", "SI", "lse_c_s")?);
    ensure!(lsd_leak > lsd_follow && lsd_leak >= SEPARATION * lsd_follow, "LSD-CR leak {lsd_leak} vs follow {lsd_follow}");
    ensure!(c_leak > c_follow && c_leak >= SEPARATION * c_follow, "LSE-C_S(CR) leak {c_leak} vs follow {c_follow}");
    Ok(Outcome::Pass(format!(
        "4 clips × 2 stubs exit 0 in {:.1}s; LSD-CR leak {lsd_leak:.3} vs follow {lsd_follow:.3}; LSE-C_S(CR) leak {c_leak:.3} vs follow {c_follow:.3}",
        started.elapsed().as_secs_f64()
    )))
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 8] = [
        ("lsd-reconstruction", lsd_reconstruction),
        ("full-reproduction", full_reproduction),
        ("sync-oracle", sync_oracle),
        ("frechet-analytic", frechet_suite),
        ("ssim-psnr", ssim_psnr_suite),
        ("pairing", pairing_suite),
        ("formats", format_suite),
        ("end-to-end-stub-run", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(Outcome::Pass(detail)) => println!("PASS {name}: {detail}"),
            Ok(Outcome::Substituted(detail)) => println!("N/A  {name}: substituted, not reproducible here ({detail})"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e:#}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
