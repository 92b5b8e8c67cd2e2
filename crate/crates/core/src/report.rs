//! Aggregation of per-clip metric records into method × setup × reference
//! tables, the leakage summary, and deterministic rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{MetricRecord, RefKind, SetupKind};
use crate::sync::{lsd, LsdInputs, SyncError};

pub mod metric {
    pub const LSE_C: &str = "lse_c";
    pub const LSE_D: &str = "lse_d";
    pub const SSIM: &str = "ssim";
    pub const PSNR: &str = "psnr";
    pub const FID: &str = "fid";
    pub const CSIM: &str = "csim";
    pub const CSIM_REF: &str = "csim_ref";
    pub const LMD: &str = "lmd";

    /// Column order of the human tables.
    pub const DISPLAY_ORDER: [&str; 8] = [SSIM, PSNR, FID, LMD, LSE_C, LSE_D, CSIM, CSIM_REF];

    pub fn label(name: &str) -> String {
        match name {
            LSE_C => "LSE-C".into(),
            LSE_D => "LSE-D".into(),
            SSIM => "SSIM".into(),
            PSNR => "PSNR".into(),
            FID => "FID".into(),
            CSIM => "CSIM".into(),
            CSIM_REF => "CSIM-ref".into(),
            LMD => "LMD".into(),
            other => other.to_uppercase(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no metric records")]
    Empty,
    #[error("conflicting records for {key}: {first} vs {second}")]
    Conflict { key: String, first: f64, second: f64 },
    #[error("record {key} has non-finite value")]
    NonFinite { key: String },
    #[error("missing cells for the leakage report: {}", .0.join(", "))]
    MissingCells(Vec<String>),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("record store line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Row/column address of one aggregated value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub method: String,
    pub setup: SetupKind,
    pub reference: RefKind,
    pub metric: String,
}

impl CellKey {
    pub fn new(method: &str, setup: SetupKind, reference: RefKind, metric: &str) -> Self {
        Self { method: method.into(), setup, reference, metric: metric.into() }
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}/{}", self.method, self.setup, self.reference, self.metric)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodSetupTable {
    pub methods: Vec<String>,
    pub metrics: Vec<String>,
    cells: BTreeMap<String, Vec<(CellKey, Cell)>>,
    /// Declared combinations without any record.
    pub absent: Vec<CellKey>,
    pub metadata: BTreeMap<String, String>,
}

impl MethodSetupTable {
    pub fn cell(&self, method: &str, setup: SetupKind, reference: RefKind, metric: &str) -> Option<Cell> {
        self.cells
            .get(method)?
            .iter()
            .find(|(k, _)| k.setup == setup && k.reference == reference && k.metric == metric)
            .map(|(_, c)| *c)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &Cell)> {
        self.cells.values().flatten().map(|(k, c)| (k, c))
    }

    pub fn is_absent(&self, key: &CellKey) -> bool {
        self.absent.binary_search(key).is_ok()
    }
}

/// Drops exact duplicates, rejects same-key records with different values.
pub fn dedup_records(records: &[MetricRecord]) -> Result<Vec<MetricRecord>, ReportError> {
    let mut seen: BTreeMap<_, &MetricRecord> = BTreeMap::new();
    for r in records {
        if !r.value.is_finite() {
            return Err(ReportError::NonFinite { key: record_label(r) });
        }
        match seen.get(&r.key()) {
            Some(prev) if prev.value.to_bits() != r.value.to_bits() => {
                return Err(ReportError::Conflict { key: record_label(r), first: prev.value, second: r.value });
            }
            Some(_) => {}
            None => {
                seen.insert(r.key(), r);
            }
        }
    }
    Ok(seen.into_values().cloned().collect())
}

fn record_label(r: &MetricRecord) -> String {
    format!("{}/{}/{}/{}/{}", r.method_name, r.clip_id, r.setup, r.reference, r.metric_name)
}

/// Unweighted mean per (method, setup, reference, metric).
pub fn aggregate(records: &[MetricRecord]) -> Result<MethodSetupTable, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let records = dedup_records(records)?;
    let mut sums: BTreeMap<CellKey, (f64, usize)> = BTreeMap::new();
    let mut methods = BTreeSet::new();
    let mut metrics = BTreeSet::new();
    let mut ar_details: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in &records {
        methods.insert(r.method_name.clone());
        metrics.insert(r.metric_name.clone());
        if r.reference.kind() == RefKind::Alternative {
            ar_details.entry(r.method_name.clone()).or_default().insert(r.reference.to_string());
        }
        let entry = sums.entry(CellKey::new(&r.method_name, r.setup, r.reference.kind(), &r.metric_name)).or_insert((0.0, 0));
        entry.0 += r.value;
        entry.1 += 1;
    }
    let mut cells: BTreeMap<String, Vec<(CellKey, Cell)>> = BTreeMap::new();
    for (key, (sum, count)) in &sums {
        cells.entry(key.method.clone()).or_default().push((key.clone(), Cell { mean: sum / *count as f64, count: *count }));
    }
    let mut absent = Vec::new();
    for m in &methods {
        for setup in SetupKind::ALL {
            for reference in RefKind::ALL {
                for metric in &metrics {
                    let key = CellKey::new(m, setup, reference, metric);
                    if !sums.contains_key(&key) {
                        absent.push(key);
                    }
                }
            }
        }
    }
    absent.sort();
    let mut metadata = BTreeMap::new();
    metadata.insert("aggregation".into(), "unweighted mean of per-clip values".into());
    for (m, refs) in ar_details {
        metadata.insert(format!("reference.{m}.AR"), refs.into_iter().collect::<Vec<_>>().join(" "));
    }
    Ok(MethodSetupTable {
        methods: methods.into_iter().collect(),
        metrics: metrics.into_iter().collect(),
        cells,
        absent,
        metadata,
    })
}

/// One value per reference column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerRef<T> {
    pub ar: T,
    pub cr: T,
}

impl<T: Copy> PerRef<T> {
    pub fn get(&self, r: RefKind) -> T {
        match r {
            RefKind::Alternative => self.ar,
            RefKind::Current => self.cr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageRow {
    pub method: String,
    pub lse_c_s: PerRef<f64>,
    pub lse_d_s: PerRef<f64>,
    pub lsd_cr: f64,
    pub lsd_ar: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub rows: Vec<LeakageRow>,
}

impl LeakageReport {
    pub fn row(&self, method: &str) -> Option<&LeakageRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// Applies the discrepancy formula to corpus means and copies the silent-input scores.
pub fn leakage_report(table: &MethodSetupTable) -> Result<LeakageReport, ReportError> {
    let mut missing = Vec::new();
    let mut rows = Vec::new();
    for method in &table.methods {
        let mut get = |setup: SetupKind, reference: RefKind, metric: &str| match table.cell(method, setup, reference, metric) {
            Some(c) => c.mean,
            None => {
                missing.push(CellKey::new(method, setup, reference, metric).label());
                f64::NAN
            }
        };
        let mut lsd_for = |reference: RefKind| LsdInputs {
            c_am: get(SetupKind::AudioMatched, reference, metric::LSE_C),
            c_xm: get(SetupKind::AudioMismatched, reference, metric::LSE_C),
            d_am: get(SetupKind::AudioMatched, reference, metric::LSE_D),
            d_xm: get(SetupKind::AudioMismatched, reference, metric::LSE_D),
        };
        let cr_inputs = lsd_for(RefKind::Current);
        let ar_inputs = lsd_for(RefKind::Alternative);
        let lse_c_s = PerRef {
            ar: get(SetupKind::SilentInput, RefKind::Alternative, metric::LSE_C),
            cr: get(SetupKind::SilentInput, RefKind::Current, metric::LSE_C),
        };
        let lse_d_s = PerRef {
            ar: get(SetupKind::SilentInput, RefKind::Alternative, metric::LSE_D),
            cr: get(SetupKind::SilentInput, RefKind::Current, metric::LSE_D),
        };
        if !missing.is_empty() {
            continue;
        }
        rows.push(LeakageRow { method: method.clone(), lse_c_s, lse_d_s, lsd_cr: lsd(&cr_inputs)?, lsd_ar: lsd(&ar_inputs)? });
    }
    if !missing.is_empty() {
        return Err(ReportError::MissingCells(missing));
    }
    Ok(LeakageReport { rows })
}

/// Discrepancy computed per clip, then averaged over clips with all four scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipLevelLsd {
    pub lsd_cr: Option<f64>,
    pub lsd_ar: Option<f64>,
    pub clips_cr: usize,
    pub clips_ar: usize,
}

/// (method, reference, clip) → (setup, metric) → value
type ClipScores = BTreeMap<(String, RefKind, String), BTreeMap<(SetupKind, String), f64>>;

pub fn clip_level_lsd(records: &[MetricRecord]) -> Result<BTreeMap<String, ClipLevelLsd>, ReportError> {
    let records = dedup_records(records)?;
    let mut values = ClipScores::new();
    for r in &records {
        if r.metric_name != metric::LSE_C && r.metric_name != metric::LSE_D {
            continue;
        }
        values
            .entry((r.method_name.clone(), r.reference.kind(), r.clip_id.clone()))
            .or_default()
            .insert((r.setup, r.metric_name.clone()), r.value);
    }
    let methods: BTreeSet<String> = records.iter().map(|r| r.method_name.clone()).collect();
    let mut out = BTreeMap::new();
    for method in methods {
        let mut per_ref = BTreeMap::new();
        for reference in RefKind::ALL {
            let mut total = 0.0;
            let mut n = 0;
            for ((m, rk, _clip), v) in &values {
                if *m != method || *rk != reference {
                    continue;
                }
                let g = |s: SetupKind, name: &str| v.get(&(s, name.to_string())).copied();
                if let (Some(c_am), Some(c_xm), Some(d_am), Some(d_xm)) = (
                    g(SetupKind::AudioMatched, metric::LSE_C),
                    g(SetupKind::AudioMismatched, metric::LSE_C),
                    g(SetupKind::AudioMatched, metric::LSE_D),
                    g(SetupKind::AudioMismatched, metric::LSE_D),
                ) {
                    total += lsd(&LsdInputs { c_am, c_xm, d_am, d_xm })?;
                    n += 1;
                }
            }
            per_ref.insert(reference, ((n > 0).then(|| total / n as f64), n));
        }
        let (cr, clips_cr) = per_ref[&RefKind::Current];
        let (ar, clips_ar) = per_ref[&RefKind::Alternative];
        out.insert(method, ClipLevelLsd { lsd_cr: cr, lsd_ar: ar, clips_cr, clips_ar });
    }
    Ok(out)
}

/// Everything a rendered report contains.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: BTreeMap<String, String>,
    pub table: MethodSetupTable,
    pub leakage: LeakageReport,
    pub clip_level: BTreeMap<String, ClipLevelLsd>,
}

impl Report {
    /// Aggregates records and derives the leakage table.
    pub fn build(records: &[MetricRecord], metadata: BTreeMap<String, String>) -> Result<Self, ReportError> {
        let table = aggregate(records)?;
        let leakage = leakage_report(&table)?;
        let clip_level = clip_level_lsd(records)?;
        let mut all = table.metadata.clone();
        all.extend(metadata);
        all.insert("lsd.primary".into(), "corpus level: discrepancy of per-setup means".into());
        all.insert("lsd.clip_level".into(), "per-clip discrepancy, then mean over clips".into());
        Ok(Self { metadata: all, table, leakage, clip_level })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    /// Comma-separated records.
    Delimited,
    /// Pretty JSON.
    Structured,
    /// Fixed-width text tables.
    Human,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" | "delimited" | "delimited-values" => Ok(Format::Delimited),
            "json" | "structured" | "structured-text" => Ok(Format::Structured),
            "table" | "human" | "human-table" => Ok(Format::Human),
            other => Err(format!("unknown format {other:?} (csv, json, table)")),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Delimited => "csv",
            Format::Structured => "json",
            Format::Human => "txt",
        }
    }
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Delimited => render_delimited(report),
        Format::Structured => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        Format::Human => render_human(report),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_delimited(report: &Report) -> String {
    let mut out = String::new();
    for (k, v) in &report.metadata {
        let _ = writeln!(out, "# {}={}", k, v.replace('\n', " "));
    }
    out.push_str("kind,method,setup,reference,metric,value,count\n");
    let mut row = |kind: &str, method: &str, setup: &str, reference: &str, metric: &str, value: String, count: String| {
        let _ = writeln!(
            out,
            "{kind},{},{setup},{reference},{},{value},{count}",
            csv_field(method),
            csv_field(metric)
        );
    };
    for (key, cell) in report.table.cells() {
        row("cell", &key.method, key.setup.code(), key.reference.code(), &key.metric, cell.mean.to_string(), cell.count.to_string());
    }
    for key in &report.table.absent {
        row("absent", &key.method, key.setup.code(), key.reference.code(), &key.metric, String::new(), "0".into());
    }
    for r in &report.leakage.rows {
        for reference in RefKind::ALL {
            row("leakage", &r.method, "SI", reference.code(), "lse_c_s", r.lse_c_s.get(reference).to_string(), String::new());
            row("leakage", &r.method, "SI", reference.code(), "lse_d_s", r.lse_d_s.get(reference).to_string(), String::new());
        }
        row("leakage", &r.method, "AM-XM", "CR", "lsd", r.lsd_cr.to_string(), String::new());
        row("leakage", &r.method, "AM-XM", "AR", "lsd", r.lsd_ar.to_string(), String::new());
    }
    for (method, c) in &report.clip_level {
        for (reference, value, n) in [("CR", c.lsd_cr, c.clips_cr), ("AR", c.lsd_ar, c.clips_ar)] {
            if let Some(v) = value {
                row("leakage", method, "AM-XM", reference, "lsd_clip_level", v.to_string(), n.to_string());
            }
        }
    }
    out
}

fn fixed(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

const SETUP_TITLES: [(SetupKind, &str); 3] = [
    (SetupKind::SilentInput, "Silent-input generation (SI), scored against the original audio"),
    (SetupKind::AudioMismatched, "Audio-mismatched generation (XM)"),
    (SetupKind::AudioMatched, "Audio-matched generation (AM)"),
];

fn render_human(report: &Report) -> String {
    const COL: usize = 8;
    let mut out = String::from("lipleak evaluation report\n");
    for (k, v) in &report.metadata {
        let _ = writeln!(out, "  {k}: {v}");
    }
    let method_w = report.table.methods.iter().map(String::len).chain([6]).max().unwrap();
    let metrics: Vec<&str> = metric::DISPLAY_ORDER
        .iter()
        .copied()
        .filter(|m| report.table.metrics.iter().any(|x| x == m))
        .chain(
            report
                .table
                .metrics
                .iter()
                .map(String::as_str)
                .filter(|m| !metric::DISPLAY_ORDER.contains(m)),
        )
        .collect();
    for (setup, title) in SETUP_TITLES {
        let _ = writeln!(out, "\n{title}\n");
        let mut head = format!("{:<method_w$}", "Method");
        let mut sub = " ".repeat(method_w);
        for m in &metrics {
            let _ = write!(head, " | {:^w$}", metric::label(m), w = 2 * COL + 1);
            let _ = write!(sub, " | {:>COL$} {:>COL$}", "AR", "CR");
        }
        let _ = writeln!(out, "{}", head.trim_end());
        let _ = writeln!(out, "{}", sub.trim_end());
        for method in &report.table.methods {
            let mut line = format!("{method:<method_w$}");
            for m in &metrics {
                let ar = report.table.cell(method, setup, RefKind::Alternative, m).map(|c| c.mean);
                let cr = report.table.cell(method, setup, RefKind::Current, m).map(|c| c.mean);
                let _ = write!(line, " | {:>COL$} {:>COL$}", fixed(ar), fixed(cr));
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
    }
    let _ = writeln!(out, "\nLip leakage\n");
    let groups = [("LSE-C_S", ["AR", "CR"]), ("LSE-D_S", ["AR", "CR"]), ("LSD", ["CR", "AR"]), ("LSD clip-level", ["CR", "AR"])];
    let mut head = format!("{:<method_w$}", "Method");
    let mut sub = " ".repeat(method_w);
    for (label, cols) in groups {
        let _ = write!(head, " | {:^w$}", label, w = 2 * COL + 1);
        let _ = write!(sub, " | {:>COL$} {:>COL$}", cols[0], cols[1]);
    }
    let _ = writeln!(out, "{}", head.trim_end());
    let _ = writeln!(out, "{}", sub.trim_end());
    for r in &report.leakage.rows {
        let clip = report.clip_level.get(&r.method);
        let _ = writeln!(
            out,
            "{:<method_w$} | {:>COL$} {:>COL$} | {:>COL$} {:>COL$} | {:>COL$} {:>COL$} | {:>COL$} {:>COL$}",
            r.method,
            fixed(Some(r.lse_c_s.ar)),
            fixed(Some(r.lse_c_s.cr)),
            fixed(Some(r.lse_d_s.ar)),
            fixed(Some(r.lse_d_s.cr)),
            fixed(Some(r.lsd_cr)),
            fixed(Some(r.lsd_ar)),
            fixed(clip.and_then(|c| c.lsd_cr)),
            fixed(clip.and_then(|c| c.lsd_ar)),
        );
    }
    out
}

/// Appends records to a JSON Lines store.
pub fn append_records(path: &Path, records: &[MetricRecord]) -> Result<(), ReportError> {
    let io_err = |source| ReportError::Io { path: path.display().to_string(), source };
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("record serializes");
        buf.push(b'\n');
    }
    file.write_all(&buf).map_err(io_err)
}

pub fn read_records(path: &Path) -> Result<Vec<MetricRecord>, ReportError> {
    let io_err = |source| ReportError::Io { path: path.display().to_string(), source };
    let file = fs::File::open(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ReportError::Malformed { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}
