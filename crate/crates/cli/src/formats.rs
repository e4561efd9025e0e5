//! On-disk formats.
//!
//! Every CSV starts with `# key: value` metadata lines, the first of which is
//! `# format: <name>/<version>`, followed by a header row. Floating-point
//! values are written in shortest round-trip form, so reading and rewriting a
//! file reproduces it byte for byte.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use homspec::beat_oracle::BeatSpectrum;
use homspec::simulator::{Baseline, CoincidenceScan};

use crate::error::{CliError, CliResult};

pub const SCAN_FORMAT: &str = "homspec-scan/1";
pub const MODEL_FORMAT: &str = "homspec-model/1";
pub const SPECTRUM_FORMAT: &str = "homspec-spectrum/1";
pub const SCAN_COLUMNS: [&str; 5] = ["delay_s", "coincidences", "heralds", "normalized", "norm_err"];

/// Provenance carried by every artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanFile {
    pub provenance: Provenance,
    pub engine: String,
    pub scan: CoincidenceScan,
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn header(out: &mut String, format: &str, p: &Provenance, extra: &[(&str, String)]) {
    writeln!(out, "# format: {format}").unwrap();
    writeln!(out, "# config_sha256: {}", p.config_sha256).unwrap();
    writeln!(out, "# seed: {}", p.seed).unwrap();
    for (k, v) in extra {
        writeln!(out, "# {k}: {v}").unwrap();
    }
    writeln!(out, "# config: {}", serde_json::to_string(&p.config).unwrap()).unwrap();
}

pub fn render_scan(file: &ScanFile) -> String {
    let s = &file.scan;
    let mut out = String::new();
    let baseline = match &s.baseline {
        Some(b) => serde_json::to_string(b).unwrap(),
        None => "none".into(),
    };
    header(
        &mut out,
        SCAN_FORMAT,
        &file.provenance,
        &[
            ("engine", file.engine.clone()),
            ("truncation_warning", s.truncation_warning.to_string()),
            ("baseline", baseline),
        ],
    );
    writeln!(out, "{}", SCAN_COLUMNS.join(",")).unwrap();
    for i in 0..s.len() {
        let opt = |v: &Option<Vec<f64>>| v.as_ref().map(|v| num(v[i])).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            num(s.delay_grid[i]),
            s.coincidences[i],
            s.heralds[i],
            opt(&s.normalized),
            opt(&s.norm_err)
        )
        .unwrap();
    }
    out
}

/// Splits `text` into its metadata map and the CSV body.
fn split_metadata(text: &str) -> (BTreeMap<String, String>, &str) {
    let mut meta = BTreeMap::new();
    let mut rest = text;
    while let Some(line) = rest.strip_prefix('#') {
        let (line, tail) = line.split_once('\n').unwrap_or((line, ""));
        if let Some((k, v)) = line.split_once(':') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
        rest = tail;
    }
    (meta, rest)
}

fn required<'a>(meta: &'a BTreeMap<String, String>, key: &str, path: &Path) -> CliResult<&'a str> {
    meta.get(key)
        .map(String::as_str)
        .ok_or_else(|| CliError::schema(path, format!("missing metadata line '# {key}: ...'")))
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str, row: usize, path: &Path) -> CliResult<T> {
    s.trim()
        .parse()
        .map_err(|_| CliError::schema(path, format!("row {row}: cannot parse {what} from '{s}'")))
}

pub fn parse_scan(text: &str, path: &Path) -> CliResult<ScanFile> {
    let (meta, body) = split_metadata(text);
    let format = required(&meta, "format", path)?;
    if format != SCAN_FORMAT {
        return Err(CliError::schema(
            path,
            format!("unsupported format '{format}', expected '{SCAN_FORMAT}' (produced by `homspec simulate`)"),
        ));
    }
    let seed = parse_field(required(&meta, "seed", path)?, "seed", 0, path)?;
    let config_sha256 = required(&meta, "config_sha256", path)?.to_string();
    let config = serde_json::from_str(required(&meta, "config", path)?)
        .map_err(|e| CliError::schema(path, format!("config metadata is not JSON: {e}")))?;
    let engine = required(&meta, "engine", path)?.to_string();
    let truncation_warning = parse_field(required(&meta, "truncation_warning", path)?, "truncation_warning", 0, path)?;
    let baseline: Option<Baseline> = match required(&meta, "baseline", path)? {
        "none" => None,
        s => Some(serde_json::from_str(s).map_err(|e| CliError::schema(path, format!("baseline metadata: {e}")))?),
    };

    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::schema(path, format!("header row: {e}")))?
        .clone();
    let mut index = [0usize; 5];
    for (slot, name) in index.iter_mut().zip(SCAN_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::schema(path, format!("missing column '{name}'")))?;
    }

    let mut scan = CoincidenceScan {
        delay_grid: Vec::new(),
        coincidences: Vec::new(),
        heralds: Vec::new(),
        normalized: None,
        norm_err: None,
        baseline,
        truncation_warning,
    };
    let (mut norm, mut err) = (Vec::new(), Vec::new());
    let mut has_norm = None;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::schema(path, format!("row {}: {e}", row + 1)))?;
        let field = |k: usize| rec.get(index[k]).unwrap_or("");
        scan.delay_grid.push(parse_field(field(0), "delay_s", row + 1, path)?);
        scan.coincidences.push(parse_field(field(1), "coincidences", row + 1, path)?);
        scan.heralds.push(parse_field(field(2), "heralds", row + 1, path)?);
        let present = !field(3).is_empty();
        if *has_norm.get_or_insert(present) != present {
            return Err(CliError::schema(path, format!("row {}: normalized is filled on some rows only", row + 1)));
        }
        if present {
            norm.push(parse_field(field(3), "normalized", row + 1, path)?);
            err.push(parse_field(field(4), "norm_err", row + 1, path)?);
        }
    }
    if scan.delay_grid.is_empty() {
        return Err(CliError::schema(path, "no data rows"));
    }
    if has_norm == Some(true) {
        scan.normalized = Some(norm);
        scan.norm_err = Some(err);
    }
    Ok(ScanFile {
        provenance: Provenance {
            config_sha256,
            seed,
            config,
        },
        engine,
        scan,
    })
}

pub fn read_scan(path: &Path) -> CliResult<ScanFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scan(&text, path)
}

pub fn render_model(p: &Provenance, tau: &[f64], prob: &[f64]) -> String {
    let mut out = String::new();
    header(&mut out, MODEL_FORMAT, p, &[]);
    writeln!(out, "delay_s,coincidence_prob,normalized").unwrap();
    for (t, v) in tau.iter().zip(prob) {
        writeln!(out, "{},{},{}", num(*t), num(*v), num(2.0 * v)).unwrap();
    }
    out
}

pub fn render_spectrum(p: &Provenance, s: &BeatSpectrum) -> String {
    let mut out = String::new();
    header(
        &mut out,
        SPECTRUM_FORMAT,
        p,
        &[
            ("resolution_bw_hz", num(s.resolution_bw_hz)),
            ("segments", s.segments.to_string()),
        ],
    );
    writeln!(out, "frequency_hz,psd_per_hz").unwrap();
    for (f, v) in s.frequency_hz.iter().zip(&s.psd) {
        writeln!(out, "{},{}", num(*f), num(*v)).unwrap();
    }
    out
}

pub fn render_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
