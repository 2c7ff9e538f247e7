//! `scan`, `patch` and `report`. Each takes parsed arguments plus output
//! streams and returns the process exit code.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, Utc};
use clap::ValueEnum;
use pita_core::catalog::{load_catalog, Catalog};
use pita_core::detector::{scan_report, Detection, Detector};
use pita_core::dom::{parse_html, serialize, HtmlDocument};
use pita_core::patch::{apply_profile, PatchReceipt};
use pita_core::profile::ProfileStore;
use pita_core::telemetry::{aggregate, daily_matrix, read_log_dir};
use serde::Serialize;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NOT_DETECTED: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// Reads the catalog at `path`, or the built-in seed when there is none.
pub fn resolve_catalog(path: Option<&Path>) -> Result<Catalog, String> {
    match path {
        None => Ok(Catalog::seed()),
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| format!("cannot read catalog {}: {e}", p.display()))?;
            load_catalog(&bytes).map_err(|e| format!("catalog {}: {e}", p.display()))
        }
    }
}

fn read_page(path: &Path) -> Result<(Vec<u8>, HtmlDocument), String> {
    let bytes = fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let doc = parse_html(&bytes, &path.display().to_string()).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((bytes, doc))
}

fn is_page(p: &Path) -> bool {
    p.extension().is_some_and(|x| x.eq_ignore_ascii_case("html") || x.eq_ignore_ascii_case("htm"))
}

/// Expands directories into their `.html` files, sorted by name.
fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>, String> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| format!("cannot list {}: {e}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_page(f))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct ScanArgs {
    pub paths: Vec<PathBuf>,
    /// Every site in the catalog when absent.
    pub site: Option<String>,
    pub catalog: Option<PathBuf>,
    pub format: Format,
}

#[derive(Serialize)]
struct FileScan<'a> {
    file: String,
    sites: &'a [String],
    report: pita_core::detector::Report,
    detections: Vec<Detection>,
}

pub fn scan(args: &ScanArgs, out: &mut dyn Write, err: &mut dyn Write) -> io::Result<u8> {
    let catalog = match resolve_catalog(args.catalog.as_deref()) {
        Ok(c) => c,
        Err(m) => {
            writeln!(err, "pita scan: {m}")?;
            return Ok(EXIT_INPUT);
        }
    };
    if args.paths.is_empty() {
        writeln!(err, "pita scan: no input files")?;
        return Ok(EXIT_INPUT);
    }
    let files = match expand(&args.paths) {
        Ok(f) => f,
        Err(m) => {
            writeln!(err, "pita scan: {m}")?;
            return Ok(EXIT_INPUT);
        }
    };
    let sites: Vec<String> = match &args.site {
        Some(s) => vec![s.clone()],
        None => catalog.sites().into_iter().map(str::to_string).collect(),
    };
    let detector = Detector::new(&catalog).expect("validated catalog");
    let mut code = EXIT_OK;
    let mut json = Vec::new();
    for file in &files {
        let doc = match read_page(file) {
            Ok((_, d)) => d,
            Err(m) => {
                writeln!(err, "pita scan: {m}")?;
                code = EXIT_INPUT;
                continue;
            }
        };
        let mut detections: Vec<Detection> = sites.iter().flat_map(|s| detector.scan(&doc, s)).collect();
        detections.sort_by(|a, b| a.locator.path.cmp(&b.locator.path).then_with(|| a.pattern_id.cmp(&b.pattern_id)));
        let report = scan_report(&detections, &catalog).expect("detections come from this catalog");
        match args.format {
            Format::Text => {
                writeln!(out, "{}:", file.display())?;
                out.write_all(report.to_text().as_bytes())?;
            }
            Format::Json => json.push(FileScan { file: file.display().to_string(), sites: &sites, report, detections }),
        }
    }
    if args.format == Format::Json {
        serde_json::to_writer_pretty(&mut *out, &json)?;
        writeln!(out)?;
    }
    Ok(code)
}

#[derive(Debug, Clone, Default)]
pub struct PatchArgs {
    pub file: PathBuf,
    pub pattern: Option<String>,
    pub enhancement: Option<String>,
    /// Profile store to take selections from when no pattern/enhancement
    /// pair is given.
    pub profile: Option<PathBuf>,
    pub site: Option<String>,
    pub catalog: Option<PathBuf>,
    /// Standard output when absent.
    pub out: Option<PathBuf>,
    pub emit_receipt: Option<PathBuf>,
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

pub fn patch(args: &PatchArgs, out: &mut dyn Write, err: &mut dyn Write) -> io::Result<u8> {
    macro_rules! fail {
        ($code:expr, $($fmt:tt)*) => {{
            writeln!(err, "pita patch: {}", format!($($fmt)*))?;
            return Ok($code);
        }};
    }
    let catalog = match resolve_catalog(args.catalog.as_deref()) {
        Ok(c) => c,
        Err(m) => fail!(EXIT_INPUT, "{m}"),
    };
    if let Some(o) = &args.out {
        if same_file(o, &args.file) {
            fail!(EXIT_INPUT, "refusing to overwrite the input file {}", o.display());
        }
    }
    let (original, doc) = match read_page(&args.file) {
        Ok(x) => x,
        Err(m) => fail!(EXIT_INPUT, "{m}"),
    };

    let mut plan: Vec<(String, Vec<(String, String)>)> = Vec::new();
    let single = match (&args.pattern, &args.enhancement) {
        (Some(p), Some(e)) => {
            let Some(spec) = catalog.pattern(p) else { fail!(EXIT_INPUT, "unknown pattern {p:?}") };
            if catalog.enhancement(e).is_none() {
                fail!(EXIT_INPUT, "unknown enhancement {e:?}");
            }
            if !catalog.offers(p, e) {
                fail!(EXIT_INPUT, "enhancement {e:?} is not offered for pattern {p:?}");
            }
            if args.site.as_ref().is_some_and(|s| s != &spec.site) {
                fail!(EXIT_INPUT, "pattern {p:?} belongs to site {:?}", spec.site);
            }
            plan.push((spec.site.clone(), vec![(p.clone(), e.clone())]));
            true
        }
        (None, None) => {
            let Some(path) = &args.profile else {
                fail!(EXIT_INPUT, "give --pattern and --enhancement, or a profile via --profile or PITA_PROFILE")
            };
            let (profile, warnings) = match ProfileStore::open(path).load(&catalog) {
                Ok(x) => x,
                Err(e) => fail!(EXIT_INPUT, "{e}"),
            };
            for w in warnings {
                writeln!(err, "pita patch: warning: dropped {}/{}: {}", w.pattern_id, w.enhancement_id, w.message)?;
            }
            let sites: Vec<String> = match &args.site {
                Some(s) => vec![s.clone()],
                None => catalog.sites().into_iter().map(str::to_string).collect(),
            };
            for site in sites {
                let selections = profile.selections_for_site(&site);
                if !selections.is_empty() {
                    plan.push((site, selections));
                }
            }
            false
        }
        _ => fail!(EXIT_INPUT, "--pattern and --enhancement must be given together"),
    };

    let mut current = doc;
    let mut receipts: Vec<PatchReceipt> = Vec::new();
    for (site, selections) in &plan {
        let applied = apply_profile(&current, &catalog, selections, site);
        for w in &applied.warnings {
            writeln!(err, "pita patch: warning: {}/{}: {}", w.pattern_id, w.enhancement_id, w.message)?;
        }
        current = applied.document;
        receipts.extend(applied.receipts);
    }
    if single && receipts.is_empty() {
        let (p, _) = &plan[0].1[0];
        fail!(EXIT_NOT_DETECTED, "pattern not detected: {p} in {}", args.file.display());
    }

    let bytes = if receipts.is_empty() { original } else { serialize(&current).into_bytes() };
    match &args.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &bytes) {
                fail!(EXIT_INPUT, "cannot write {}: {e}", path.display());
            }
        }
        None => out.write_all(&bytes)?,
    }
    if let Some(path) = &args.emit_receipt {
        let json = serde_json::to_string_pretty(&receipts).expect("receipts serialize");
        if let Err(e) = fs::write(path, json + "\n") {
            fail!(EXIT_INPUT, "cannot write {}: {e}", path.display());
        }
    }
    writeln!(err, "pita patch: applied {} enhancement(s)", receipts.len())?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Default)]
pub struct ReportArgs {
    pub log_dir: PathBuf,
    /// Defaults to the span from `start` to the last logged day.
    pub days: Option<usize>,
    /// Defaults to the first logged day.
    pub start: Option<NaiveDate>,
    pub format: Format,
}

pub fn report(args: &ReportArgs, out: &mut dyn Write, err: &mut dyn Write) -> io::Result<u8> {
    let snap = match read_log_dir(&args.log_dir) {
        Ok(s) => s,
        Err(e) => {
            writeln!(err, "pita report: cannot read {}: {e}", args.log_dir.display())?;
            return Ok(EXIT_INPUT);
        }
    };
    if snap.malformed > 0 {
        writeln!(err, "pita report: warning: skipped {} malformed line(s)", snap.malformed)?;
    }
    let days: Vec<NaiveDate> = snap
        .events
        .iter()
        .map(|e| e.timestamp.date_naive())
        .chain(snap.notes.iter().map(|n| n.timestamp.date_naive()))
        .collect();
    let start = args.start.or_else(|| days.iter().min().copied()).unwrap_or_else(|| Utc::now().date_naive());
    let n_days = args.days.unwrap_or_else(|| match days.iter().max() {
        Some(last) if *last >= start => (*last - start).num_days() as usize + 1,
        _ => 0,
    });
    let stats = aggregate(&snap.events, &snap.notes);
    let matrix = daily_matrix(&snap.events, &snap.notes, start, n_days);
    match args.format {
        Format::Text => {
            out.write_all(stats.to_text().as_bytes())?;
            writeln!(out)?;
            writeln!(out, "daily engagement from {start} ({n_days} days; v=visited m=modified d=diary)")?;
            out.write_all(matrix.to_ascii().as_bytes())?;
        }
        Format::Json => {
            let v = serde_json::json!({ "stats": stats, "matrix": matrix, "malformed": snap.malformed });
            serde_json::to_writer_pretty(&mut *out, &v)?;
            writeln!(out)?;
        }
    }
    Ok(EXIT_OK)
}
