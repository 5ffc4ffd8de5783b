//! Deterministic SVG rendering of the emitted CSV tables. The first column
//! is the horizontal axis, every other column a series; empty cells break
//! the line. CSV stays the source of truth, the plot is a readable view.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ddc_core::{DdcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Straight segments between consecutive points.
    Line,
    /// Straight segments over a log10 vertical axis; non-positive values
    /// are skipped.
    LogY,
    /// Piecewise-constant steps, natural for per-iteration traces.
    Step,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub fn emit_plot(csv_path: &Path, kind: PlotKind, svg_path: &Path) -> Result<()> {
    let (headers, rows) = read_table(csv_path)?;
    let transform = |v: f64| -> Option<f64> {
        match kind {
            PlotKind::LogY if v <= 0.0 => None,
            PlotKind::LogY => Some(v.log10()),
            _ => Some(v),
        }
    };

    // Split each series into contiguous segments at missing cells.
    let mut series: Vec<(String, Vec<Vec<(f64, f64)>>)> = Vec::new();
    for j in 1..headers.len() {
        let mut segments: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut current: Vec<(f64, f64)> = Vec::new();
        for row in &rows {
            let x = row[0].expect("x column verified dense");
            match row[j].and_then(transform) {
                Some(y) => current.push((x, y)),
                None => {
                    if !current.is_empty() {
                        segments.push(std::mem::take(&mut current));
                    }
                }
            }
        }
        if !current.is_empty() {
            segments.push(current);
        }
        series.push((headers[j].clone(), segments));
    }

    let points = || series.iter().flat_map(|(_, segs)| segs.iter().flatten());
    if points().next().is_none() {
        return Err(DdcError::Parse {
            line: 1,
            msg: format!("{}: no plottable values", csv_path.display()),
        });
    }
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for &(x, y) in points() {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max += 0.5;
        y_min -= 0.5;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let sy = |y: f64| {
        HEIGHT - MARGIN_B - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    );

    for i in 0..5 {
        let f = i as f64 / 4.0;
        let xv = x_min + f * (x_max - x_min);
        let yv = y_min + f * (y_max - y_min);
        let px = sx(xv);
        let py = sy(yv);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#333"/>"##,
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN_B + 18.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{py:.2}" x2="{MARGIN_L}" y2="{py:.2}" stroke="#333"/>"##,
            MARGIN_L - 5.0
        );
        let label = match kind {
            PlotKind::LogY => fmt_tick(10f64.powf(yv)),
            _ => fmt_tick(yv),
        };
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#,
            MARGIN_L - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        HEIGHT - 8.0,
        xml_escape(&headers[0])
    );

    for (idx, (name, segments)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        for seg in segments {
            let mut pts = String::new();
            let mut prev: Option<(f64, f64)> = None;
            for &(x, y) in seg {
                if let (PlotKind::Step, Some((_, py))) = (kind, prev) {
                    let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(py));
                }
                let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(y));
                prev = Some((x, y));
            }
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.trim_end()
            );
        }
        let ly = MARGIN_T + 14.0 + 16.0 * idx as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>"#,
            WIDTH - MARGIN_R + 8.0,
            WIDTH - MARGIN_R + 28.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{}</text>"#,
            WIDTH - MARGIN_R + 34.0,
            ly + 4.0,
            xml_escape(name)
        );
    }
    let _ = writeln!(svg, "</svg>");
    fs::write(svg_path, svg)?;
    Ok(())
}

/// Reads a CSV table: header row plus numeric data rows. Empty cells become
/// `None`; anything else must parse as a float. The first column must be
/// dense.
fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if headers.len() < 2 {
        return Err(DdcError::Parse {
            line: 1,
            msg: format!("{}: need an axis column and at least one series", path.display()),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = i + 2;
        if record.len() != headers.len() {
            return Err(DdcError::Parse {
                line,
                msg: format!("expected {} cells, found {}", headers.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(record.len());
        for cell in record.iter() {
            if cell.is_empty() {
                row.push(None);
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => row.push(Some(v)),
                    _ => {
                        return Err(DdcError::Parse {
                            line,
                            msg: format!("cell {cell:?} is not a finite number"),
                        })
                    }
                }
            }
        }
        if row[0].is_none() {
            return Err(DdcError::Parse {
                line,
                msg: "missing value in the axis column".into(),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DdcError::Parse {
            line: 1,
            msg: format!("{}: no data rows", path.display()),
        });
    }
    Ok((headers, rows))
}

fn csv_err(e: csv::Error) -> DdcError {
    DdcError::Parse {
        line: e.position().map(|p| p.line() as usize).unwrap_or(0),
        msg: e.to_string(),
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        if trimmed == "-0" {
            "0".into()
        } else {
            trimmed.to_string()
        }
    } else {
        format!("{v:.2e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
