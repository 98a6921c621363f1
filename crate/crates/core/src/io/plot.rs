//! Minimal SVG line charts of diagnostics columns.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::csv::CsvTable;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YScale {
    Linear,
    Log,
}

/// Log scale is used whenever `E_rel` is among the plotted columns.
pub fn auto_scale(columns: &[String]) -> YScale {
    if columns.iter().any(|c| c == "E_rel") {
        YScale::Log
    } else {
        YScale::Linear
    }
}

/// Reads `csv_path`, plots `columns` against `t`, and writes the SVG.
pub fn emit_plot(csv_path: impl AsRef<Path>, columns: &[String], out_path: impl AsRef<Path>) -> Result<()> {
    let table = CsvTable::read(csv_path)?;
    let svg = render_svg(&table, columns)?;
    let out = out_path.as_ref();
    std::fs::write(out, svg).map_err(|e| Error::io(out, e))
}

pub fn render_svg(table: &CsvTable, columns: &[String]) -> Result<String> {
    if columns.is_empty() {
        return Err(Error::validation("no columns requested"));
    }
    let scale = auto_scale(columns);
    let mut series = Vec::with_capacity(columns.len());
    for name in columns {
        let mut points = table.series("t", name)?;
        if scale == YScale::Log {
            points.retain(|&(_, y)| y > 0.0);
        }
        series.push(points);
    }
    if table.rows.is_empty() {
        return Err(Error::validation("no data rows"));
    }

    let all = series.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        let y = transform(y, scale);
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        // Every requested value is missing (e.g. E on a moving preset).
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 1e-12 * y0.abs().max(1.0) {
        let pad = 0.5 * y0.abs().max(1.0) * if scale == YScale::Log { 1.0 } else { 1e-3 };
        y0 -= pad;
        y1 += pad;
    }

    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    for n in 0..=4 {
        let f = n as f64 / 4.0;
        let (x, y) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(x), sy(y));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + ph,
            MARGIN_TOP + ph + 5.0,
            MARGIN_TOP + ph + 20.0,
            tick_label(x)
        );
        let label = match scale {
            YScale::Linear => tick_label(y),
            YScale::Log => format!("1e{y:.1}"),
        };
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    if scale == YScale::Log {
        let _ = writeln!(
            s,
            r#"<text x="15" y="{:.2}" transform="rotate(-90 15 {:.2})" text-anchor="middle">log10 scale</text>"#,
            MARGIN_TOP + ph / 2.0,
            MARGIN_TOP + ph / 2.0
        );
    }

    for (n, (name, points)) in columns.iter().zip(&series).enumerate() {
        let color = COLORS[n % COLORS.len()];
        if !points.is_empty() {
            let path: Vec<String> = points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(transform(y, scale))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = MARGIN_TOP + 15.0 + 18.0 * n as f64;
        let lx = WIDTH - MARGIN_RIGHT + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn transform(y: f64, scale: YScale) -> f64 {
    match scale {
        YScale::Linear => y,
        YScale::Log => y.log10(),
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
