//! Minimal deterministic SVG line plots of CSV columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("column '{0}' not found in the CSV header")]
    MissingColumn(String),
    #[error("no plottable rows")]
    EmptyData,
    #[error("row {row}: cannot parse '{value}' in column '{column}'")]
    BadValue { row: usize, column: String, value: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub input: PathBuf,
    pub x: String,
    pub y: String,
    /// One polyline per distinct value of this column.
    pub group: Option<String>,
    pub x_label: String,
    pub y_label: String,
    pub output: PathBuf,
    /// Draw each series as a step function.
    pub staircase: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Reads the columns named in `spec` from CSV text. Lines starting with `#`
/// are ignored. Groups keep their order of first appearance.
pub fn series_from_csv(text: &str, spec: &PlotSpec) -> Result<Vec<Series>, PlotError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column =
        |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| PlotError::MissingColumn(name.to_string()));
    let xi = column(&spec.x)?;
    let yi = column(&spec.y)?;
    let gi = spec.group.as_deref().map(column).transpose()?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize, name: &str| -> Result<f64, PlotError> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| PlotError::BadValue {
                row: row + 1,
                column: name.to_string(),
                value: raw.to_string(),
            })
        };
        let x = parse(xi, &spec.x)?;
        let y = parse(yi, &spec.y)?;
        let key = gi.map_or_else(String::new, |g| record.get(g).unwrap_or("").to_string());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push((x, y));
    }
    let series: Vec<Series> = order
        .into_iter()
        .map(|label| {
            let points = groups.remove(&label).unwrap_or_default();
            let label = match &spec.group {
                Some(g) => format!("{g}={label}"),
                None => spec.y.clone(),
            };
            Series { label, points }
        })
        .collect();
    if series.iter().all(|s| s.points.iter().all(|(x, y)| !x.is_finite() || !y.is_finite())) {
        return Err(PlotError::EmptyData);
    }
    Ok(series)
}

pub fn render_csv(text: &str, spec: &PlotSpec) -> Result<String, PlotError> {
    let mut series = series_from_csv(text, spec)?;
    if spec.staircase {
        for s in &mut series {
            s.points = staircase(&s.points);
        }
    }
    render_svg(&series, &spec.x_label, &spec.y_label)
}

/// Step function through points sorted by x; each value is held on the
/// interval ending at its own x.
pub fn staircase(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(2 * sorted.len());
    for (i, &(x, y)) in sorted.iter().enumerate() {
        if i > 0 {
            out.push((sorted[i - 1].0, y));
        }
        out.push((x, y));
    }
    out
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub fn render_svg(series: &[Series], x_label: &str, y_label: &str) -> Result<String, PlotError> {
    let finite = || series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    if finite().next().is_none() {
        return Err(PlotError::EmptyData);
    }
    let (x_lo, x_hi) = padded_range(finite().map(|p| p.0));
    let (y_lo, y_hi) = padded_range(finite().map(|p| p.1));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ =
        writeln!(svg, r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#);
    for t in ticks(x_lo, x_hi) {
        let px = sx(t.0);
        let bottom = TOP + plot_h;
        let _ =
            writeln!(svg, r#"<line x1="{px:.2}" y1="{bottom}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(
            svg,
            r#"<text x="{px:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            bottom + 18.0,
            t.1
        );
    }
    for t in ticks(y_lo, y_hi) {
        let py = sy(t.0);
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            py + 4.0,
            t.1
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ =
            writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 15.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        let pad = 0.03 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 0.5 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Tick positions at a 1-2-5 step, with labels printed to the step's precision.
fn ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last)
        .map(|k| {
            let t = k as f64 * step;
            let label = format!("{:.*}", decimals, t);
            let label = if label.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
                format!("{:.*}", decimals, 0.0)
            } else {
                label
            };
            (t, label)
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
