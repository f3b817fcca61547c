//! Summary statistics, CSV emission and minimal SVG charts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// z-quantile for two-sided 95% normal intervals.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary {
            n,
            mean: f64::NAN,
            std: f64::NAN,
            ci95_low: f64::NAN,
            ci95_high: f64::NAN,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let half = Z95 * std / (n as f64).sqrt();
    Summary {
        n,
        mean,
        std,
        ci95_low: mean - half,
        ci95_high: mean + half,
    }
}

/// Element-wise `a - b`.
pub fn paired_differences(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Provenance written as the first line of every CSV.
#[derive(Debug, Clone)]
pub struct Meta {
    pub config_hash: String,
    pub seed: u64,
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn csv_string(meta: &Meta, header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = String::from_utf8(w.into_inner().context("flushing csv")?)?;
    Ok(format!(
        "# config_hash={} seed={}\n{body}",
        meta.config_hash, meta.seed
    ))
}

pub fn write_csv(path: &Path, meta: &Meta, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let text = csv_string(meta, header, rows)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 60.0;

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD / 2.0,
        H - PAD,
        H - PAD
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn y_range(values: &[f64]) -> (f64, f64) {
    let lo = values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let hi = values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn y_axis(s: &mut String, lo: f64, hi: f64) {
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = H - PAD - (H - 1.5 * PAD) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" text-anchor="end">{v:.3}</text>"#,
            PAD - 6.0
        );
    }
}

pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let mut s = svg_open(title);
    let (lo, hi) = y_range(values);
    y_axis(&mut s, lo, hi);
    let slot = (W - 1.5 * PAD) / values.len().max(1) as f64;
    let scale = (H - 1.5 * PAD) / (hi - lo);
    let zero = H - PAD - (0.0 - lo) * scale;
    for (k, (label, &v)) in labels.iter().zip(values).enumerate() {
        let x = PAD + slot * k as f64 + slot * 0.15;
        let top = zero.min(zero - v * scale);
        let height = (v * scale).abs();
        let _ = writeln!(
            s,
            r##"<rect x="{x}" y="{top}" width="{}" height="{height}" fill="#4a7ab5"/>"##,
            slot * 0.7
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x + slot * 0.35,
            H - PAD + 16.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn line_chart(title: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut s = svg_open(title);
    let (lo, hi) = y_range(ys);
    y_axis(&mut s, lo, hi);
    let xmin = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xspan = if xmax > xmin { xmax - xmin } else { 1.0 };
    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let px = PAD + (x - xmin) / xspan * (W - 1.5 * PAD);
            let py = H - PAD - (y - lo) / (hi - lo) * (H - 1.5 * PAD);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#4a7ab5" stroke-width="1.5" points="{}"/>"##,
        points.join(" ")
    );
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}">{xmin}</text><text x="{}" y="{}" text-anchor="end">{xmax}</text>"#,
        H - PAD + 16.0,
        W - PAD / 2.0,
        H - PAD + 16.0
    );
    s.push_str("</svg>\n");
    s
}
