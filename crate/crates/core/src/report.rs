//! CSV and SVG output of BER curves.

use std::fmt::Write as _;
use std::io::{Read, Write};

use thiserror::Error;

use crate::engine::{BerRecord, CsiMode, StopReason};

pub const CSV_HEADER: [&str; 10] = [
    "label",
    "snr_db",
    "frames",
    "bit_errors",
    "bit_errors_ti",
    "bit_errors_ai",
    "bit_errors_sym",
    "ber",
    "ci95",
    "stop_reason",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unexpected CSV header {0:?}")]
    Header(Vec<String>),
    #[error("row {row}: bad value in column `{column}`")]
    Value { row: usize, column: &'static str },
}

/// Writes records in order. Floats use Rust's shortest round-trip formatting,
/// which is locale independent.
pub fn write_csv<W: Write>(out: W, records: &[BerRecord]) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.label.clone(),
            r.snr_db.to_string(),
            r.frames_run.to_string(),
            r.bit_errors_total.to_string(),
            r.bit_errors_time_index.to_string(),
            r.bit_errors_antenna_index.to_string(),
            r.bit_errors_symbol.to_string(),
            r.ber.to_string(),
            r.ci95_halfwidth.to_string(),
            r.stop_reason.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BerRecord>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(ReportError::Header(header));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = i + 2;
        let num = |idx: usize| -> Result<u64, ReportError> {
            row[idx].parse().map_err(|_| ReportError::Value { row: row_no, column: CSV_HEADER[idx] })
        };
        let float = |idx: usize| -> Result<f64, ReportError> {
            row[idx].parse().map_err(|_| ReportError::Value { row: row_no, column: CSV_HEADER[idx] })
        };
        let stop_reason = match &row[9] {
            "min_errors" => StopReason::MinErrors,
            "max_frames" => StopReason::MaxFrames,
            _ => return Err(ReportError::Value { row: row_no, column: "stop_reason" }),
        };
        out.push(BerRecord {
            label: row[0].to_string(),
            snr_db: float(1)?,
            frames_run: num(2)?,
            bit_errors_total: num(3)?,
            bit_errors_time_index: num(4)?,
            bit_errors_antenna_index: num(5)?,
            bit_errors_symbol: num(6)?,
            ber: float(7)?,
            ci95_halfwidth: float(8)?,
            stop_reason,
        });
    }
    Ok(out)
}

/// Records of one label, in file order.
pub fn select_curve<'a>(records: &'a [BerRecord], label: &str) -> Vec<&'a BerRecord> {
    records.iter().filter(|r| r.label == label).collect()
}

/// Distinct labels in order of first appearance.
pub fn labels(records: &[BerRecord]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in records {
        if !out.contains(&r.label) {
            out.push(r.label.clone());
        }
    }
    out
}

pub struct PlotCurve<'a> {
    pub label: &'a str,
    pub csi: CsiMode,
    pub records: &'a [BerRecord],
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// BER-vs-SNR chart on a log axis. Perfect-CSI curves are solid, CEE curves
/// dashed; a scheme keeps its color in both modes.
pub fn render_svg(title: &str, curves: &[PlotCurve<'_>]) -> String {
    let (w, h) = (820.0, 560.0);
    let (left, right, top, bottom) = (80.0, 230.0, 50.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let pts: Vec<&BerRecord> = curves.iter().flat_map(|c| c.records.iter()).filter(|r| r.ber > 0.0).collect();
    let (mut xmin, mut xmax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.snr_db), b.max(r.snr_db)));
    if !xmin.is_finite() {
        xmin = 0.0;
        xmax = 1.0;
    }
    if xmax <= xmin {
        xmax = xmin + 1.0;
    }
    let lowest = pts.iter().map(|r| r.ber).fold(1.0f64, f64::min);
    let ymin = lowest.log10().floor().min(-1.0);
    let ymax = 0.0;
    let sx = |x: f64| left + (x - xmin) / (xmax - xmin) * pw;
    let sy = |y: f64| top + (ymax - y.log10()) / (ymax - ymin) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="25" text-anchor="middle" font-size="15">{}</text>"#, left + pw / 2.0, escape(title));
    // decades
    let mut d = ymin as i32;
    while d <= ymax as i32 {
        let y = top + (ymax - f64::from(d)) / (ymax - ymin) * ph;
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, left + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, left - 6.0, y + 4.0);
        d += 1;
    }
    let span = xmax - xmin;
    let step = [1.0, 2.0, 5.0, 10.0, 20.0].into_iter().find(|st| span / st <= 12.0).unwrap_or(50.0);
    let mut x = (xmin / step).ceil() * step;
    while x <= xmax + 1e-9 {
        let px = sx(x);
        let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{top}" x2="{px:.2}" y2="{:.2}" stroke="#eee"/>"##, top + ph);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#, top + ph + 18.0);
        x += step;
    }
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">SNR (dB)</text>"#, left + pw / 2.0, h - 15.0);
    let _ = writeln!(s, r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">BER</text>"#, top + ph / 2.0, top + ph / 2.0);

    let mut schemes: Vec<String> = Vec::new();
    for (i, c) in curves.iter().enumerate() {
        let base = c.label.trim_end_matches(" CEE").to_string();
        let color_idx = match schemes.iter().position(|b| *b == base) {
            Some(p) => p,
            None => {
                schemes.push(base);
                schemes.len() - 1
            }
        };
        let color = PALETTE[color_idx % PALETTE.len()];
        let dash = match c.csi {
            CsiMode::Perfect => "",
            CsiMode::Cee => r#" stroke-dasharray="6 4""#,
        };
        let path: Vec<String> = c
            .records
            .iter()
            .filter(|r| r.ber > 0.0)
            .map(|r| format!("{:.2},{:.2}", sx(r.snr_db), sy(r.ber)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#, path.join(" "));
            for p in &path {
                let (px, py) = p.split_once(',').expect("formatted pair");
                let _ = writeln!(s, r#"<circle cx="{px}" cy="{py}" r="2.5" fill="{color}"/>"#);
            }
        }
        let ly = top + 10.0 + 20.0 * i as f64;
        let lx = left + pw + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.8"{dash}/>"#, lx + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 36.0, ly + 4.0, escape(c.label));
    }
    s.push_str("</svg>\n");
    s
}
