//! CSV and SVG writers.
//!
//! Every CSV starts with a metadata block: the `# @sche` marker, `# @key value`
//! information lines and the canonical configuration as `# key = value`
//! lines. Comma separated, `.` decimal point, LF line endings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{fmt_f64, RunConfig, HEADER_MARKER};
use crate::error::Result;
use crate::experiments::{ConvergenceTable, Snapshots};
use crate::grid::SpectralBasis;
use crate::observables::RunningAverage;

pub fn metadata_header(kind: &str, cfg: &RunConfig, info: &[(&str, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER_MARKER} {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# @file {kind}");
    let _ = writeln!(s, "# @config_hash {}", cfg.content_hash());
    for (k, v) in info {
        let _ = writeln!(s, "# @{k} {v}");
    }
    for line in cfg.to_text().lines() {
        let _ = writeln!(s, "# {line}");
    }
    s
}

fn num(v: f64) -> String {
    fmt_f64(v)
}

pub fn convergence_csv(header: &str, table: &ConvergenceTable, slope: Option<f64>) -> String {
    let mut s = header.to_string();
    s.push_str("param_kind,tau,N,error,pair_rate\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            table.kind.as_str(),
            num(r.tau),
            r.n_modes,
            num(r.error),
            r.rate.map(num).unwrap_or_default()
        );
    }
    if let Some(slope) = slope {
        let _ = writeln!(s, "# @slope {}", num(slope));
    }
    s
}

pub fn history_csv(header: &str, avg: &RunningAverage) -> String {
    let mut s = header.to_string();
    s.push_str("t,value\n");
    for &(t, a) in &avg.history {
        let _ = writeln!(s, "{},{}", num(t), num(a));
    }
    s
}

pub struct SummaryRow {
    pub name: String,
    pub estimate: f64,
    pub wallclock_s: f64,
}

pub fn summary_csv(header: &str, rows: &[SummaryRow]) -> String {
    let mut s = header.to_string();
    s.push_str("name,estimate,abs_error_vs_zero,wallclock_s\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.name,
            num(r.estimate),
            num(r.estimate.abs()),
            num(r.wallclock_s)
        );
    }
    s
}

/// Long format: one row per `(t, x)` pair.
pub fn snapshots_csv(header: &str, basis: &SpectralBasis, snaps: &Snapshots) -> String {
    let mut s = header.to_string();
    s.push_str("t,x,value\n");
    for (t, u) in &snaps.frames {
        for (x, v) in basis.grid().iter().zip(&u.0) {
            let _ = writeln!(s, "{},{},{}", num(*t), num(*x), num(*v));
        }
    }
    s
}

pub fn verify_csv(header: &str, results: &[crate::verify::CheckResult]) -> String {
    let mut s = header.to_string();
    s.push_str("invariant,passed,detail\n");
    for r in results {
        let _ = writeln!(s, "{},{},\"{}\"", r.name, r.passed, r.detail.replace('"', "'"));
    }
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Minimal line chart; with `log_log` both axes are base-2 logarithmic and
/// nonpositive points are dropped.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_log: bool) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let tr = |v: f64| if log_log { v.log2() } else { v };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| !log_log || (*x > 0.0 && *y > 0.0))
                .map(|&(x, y)| (tr(x), tr(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let lbl = |v: f64| if log_log { format!("2^{v:.2}") } else { format!("{v:.4}") };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(s, r#"<text x="{m}" y="{}">{}</text>"#, h - m + 15.0, lbl(x0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, w - m, h - m + 15.0, lbl(x1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, m - 4.0, h - m, lbl(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, m - 4.0, m + 10.0, lbl(y1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 15.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (k, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            m + 8.0,
            m + 16.0 + 14.0 * k as f64,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
