//! Self-contained SVG regret plots from a summary CSV.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{read, write, CliError, Result};
use crate::track::SUMMARY_HEADER;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 56.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: &'static str,
    pub color: &'static str,
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub t: Vec<f64>,
    pub series: Vec<Series>,
}

pub fn parse_summary(text: &str, path: &Path) -> Result<SummaryTable> {
    let err = |line: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == SUMMARY_HEADER => {}
        Some((i, h)) => return Err(err(i + 1, format!("expected header `{SUMMARY_HEADER}`, found `{}`", h.trim()))),
        None => return Err(err(0, "empty summary".into())),
    }
    let mut t = Vec::new();
    let mut cols: [Vec<f64>; 4] = Default::default();
    let mut has_pool = None;
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(err(i + 1, format!("expected 5 fields, found {}", fields.len())));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(i + 1, format!("`{s}` is not a finite number")))
        };
        let pool_here = !(fields[3].is_empty() && fields[4].is_empty());
        if *has_pool.get_or_insert(pool_here) != pool_here {
            return Err(err(i + 1, "pool columns present on some rows only".into()));
        }
        t.push(num(fields[0])?);
        for (c, field) in cols.iter_mut().zip(&fields[1..]).take(if pool_here { 4 } else { 2 }) {
            c.push(num(field)?);
        }
    }
    if t.is_empty() {
        return Err(err(0, "no data rows".into()));
    }
    let [hm, hs, pm, ps] = cols;
    let mut series = vec![Series {
        label: "vs best in hindsight",
        color: "#1f77b4",
        mean: hm,
        stddev: hs,
    }];
    if has_pool == Some(true) {
        series.push(Series {
            label: "vs pool best",
            color: "#d62728",
            mean: pm,
            stddev: ps,
        });
    }
    Ok(SummaryTable { t, series })
}

/// Round tick spacing giving roughly `target` intervals over `[lo, hi]`.
fn tick_step(lo: f64, hi: f64, target: f64) -> f64 {
    let raw = (hi - lo) / target;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac < 1.5 {
        1.0
    } else if frac < 3.5 {
        2.0
    } else if frac < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = tick_step(lo, hi, 5.0);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn padded(lo: f64, hi: f64, frac: f64) -> (f64, f64) {
    if hi > lo {
        let pad = (hi - lo) * frac;
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

pub fn render_svg(table: &SummaryTable) -> String {
    let (x0, x1) = padded(
        table.t.iter().copied().fold(f64::INFINITY, f64::min),
        table.t.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        0.0,
    );
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for s in &table.series {
        for (m, d) in s.mean.iter().zip(&s.stddev) {
            lo = lo.min(m - d);
            hi = hi.max(m + d);
        }
    }
    let (y0, y1) = padded(lo, hi, 0.05);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    for x in ticks(x0, x1) {
        let px = sx(x);
        let _ = writeln!(
            svg,
            r##"<line class="tick" x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#000"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0,
            label(x)
        );
    }
    for y in ticks(y0, y1) {
        let py = sy(y);
        let _ = writeln!(
            svg,
            r##"<line class="grid" x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            py + 4.0,
            label(y)
        );
    }
    let zero = sy(0.0);
    let _ = writeln!(
        svg,
        r##"<line class="zero" x1="{LEFT}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        LEFT + plot_w
    );

    for s in &table.series {
        let upper = table.t.iter().zip(s.mean.iter().zip(&s.stddev)).map(|(&t, (m, d))| (sx(t), sy(m + d)));
        let lower = table.t.iter().zip(s.mean.iter().zip(&s.stddev)).rev().map(|(&t, (m, d))| (sx(t), sy(m - d)));
        let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="band" points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" "),
            s.color
        );
        let line: Vec<String> = table
            .t
            .iter()
            .zip(&s.mean)
            .map(|(&t, &m)| format!("{:.2},{:.2}", sx(t), sy(m)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            line.join(" "),
            s.color
        );
    }

    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#000"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time step t</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">regret (mean ± 1 sd)</text>"#,
        TOP + plot_h / 2.0
    );
    for (i, s) in table.series.iter().enumerate() {
        let y = TOP + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            LEFT + 10.0,
            LEFT + 30.0,
            s.color,
            LEFT + 36.0,
            y + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders `summary_csv` (as written by `track`) to `out_svg`.
pub fn cmd_plot(summary_csv: &Path, out_svg: &Path) -> Result<SummaryTable> {
    let table = parse_summary(&read(summary_csv)?, summary_csv)?;
    write(out_svg, &render_svg(&table))?;
    Ok(table)
}
