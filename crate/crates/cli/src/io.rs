//! Artifact writers. Every file carries the schema version, the config hash and the seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Bumped whenever a CSV header or JSON field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    /// The scenario that produced the artifact, enough to regenerate it.
    pub config: serde_json::Value,
}

impl Header {
    pub fn new(config: serde_json::Value, hashed: &serde_json::Value, seed: u64) -> Self {
        Self { schema_version: SCHEMA_VERSION, config_hash: config_hash(hashed), seed, config }
    }
}

/// SHA-256 of the compact JSON form; object keys are sorted, so the hash ignores field order.
pub fn config_hash(v: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(v).expect("JSON values serialize");
    Sha256::digest(&bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::IoFailure { path: path.to_path_buf(), message: e.to_string() }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// CSV with `#` comment lines for the header, then one header row and the data rows.
pub fn write_csv(path: &Path, header: &Header, columns: &[String], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
    let mut out = String::new();
    let _ = writeln!(out, "# slelab schema_version={}", header.schema_version);
    let _ = writeln!(out, "# config_hash={}", header.config_hash);
    let _ = writeln!(out, "# seed={}", header.seed);
    let _ = writeln!(out, "# config={}", header.config);
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(columns).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string())).map_err(|e| io_err(path, e))?;
    }
    let body = w.into_inner().map_err(|e| io_err(path, e))?;
    out.push_str(std::str::from_utf8(&body).expect("CSV of numbers is UTF-8"));
    fs::write(path, out).map_err(|e| io_err(path, e))?;
    Ok(path.to_path_buf())
}

/// Reads back the data rows of a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| io_err(path, e))?;
    let cols = r.headers().map_err(|e| io_err(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| io_err(path, format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((cols, rows))
}

#[derive(Serialize)]
struct JsonArtifact<'a, T: Serialize> {
    #[serde(flatten)]
    header: &'a Header,
    result: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, header: &Header, result: &T) -> Result<PathBuf, CliError> {
    let mut s = serde_json::to_string_pretty(&JsonArtifact { header, result }).map_err(|e| io_err(path, e))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| io_err(path, e))?;
    Ok(path.to_path_buf())
}

/// A labelled point drawn on top of the polylines.
#[derive(Debug, Clone, PartialEq)]
pub struct Mark {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Vec<(f64, f64)>>,
    pub marks: Vec<Mark>,
    /// Same scale on both axes (traces in the plane).
    pub equal_aspect: bool,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One `<polyline>` per line, a frame with the data range on each axis, and the marks.
pub fn render_svg(plot: &Plot, header: &Header) -> String {
    let pts = plot.lines.iter().flatten().copied().chain(plot.marks.iter().map(|m| (m.x, m.y)));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    if y1 - y0 < 1e-12 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let (mut sx, mut sy) = ((W - 2.0 * PAD) / (x1 - x0), (H - 2.0 * PAD) / (y1 - y0));
    if plot.equal_aspect {
        let s = sx.min(sy);
        (sx, sy) = (s, s);
    }
    let px = |x: f64| PAD + (x - x0) * sx;
    let py = |y: f64| H - PAD - (y - y0) * sy;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        "<!-- slelab schema_version={} config_hash={} seed={} -->",
        header.schema_version, header.config_hash, header.seed
    );
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, "<metadata>{}</metadata>", xml_escape(&header.config.to_string()));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black" stroke-width="0.8"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, xml_escape(&plot.title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, xml_escape(&plot.x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        xml_escape(&plot.y_label)
    );
    let tick = |v: f64| format!("{v:.3}");
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" font-size="10" text-anchor="start">{}</text>"#, H - PAD + 14.0, tick(x0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#, W - PAD, H - PAD + 14.0, tick(x0 + (W - 2.0 * PAD) / sx));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#, PAD - 4.0, H - PAD, tick(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#, PAD - 4.0, PAD + 8.0, tick(y0 + (H - 2.0 * PAD) / sy));
    for (k, line) in plot.lines.iter().enumerate() {
        let pts: Vec<String> =
            line.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            COLORS[k % COLORS.len()],
            pts.join(" ")
        );
    }
    for m in &plot.marks {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="black"/>"#, px(m.x), py(m.y));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#, px(m.x) + 4.0, py(m.y) - 4.0, xml_escape(&m.label));
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, plot: &Plot, header: &Header) -> Result<PathBuf, CliError> {
    fs::write(path, render_svg(plot, header)).map_err(|e| io_err(path, e))?;
    Ok(path.to_path_buf())
}
