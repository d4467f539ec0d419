//! Minimal static SVG line charts, rendered from trajectory CSV files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::scenario::csv::{read_csv, CsvTable};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const MAX_POINTS: usize = 1500;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed vertical range; otherwise fitted to the data.
    pub y_range: Option<(f64, f64)>,
}

/// Roughly `target` round tick values covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e5 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LinePlot {
    pub fn to_svg(&self) -> String {
        let xs = self.series.iter().flat_map(|s| s.x.iter().copied());
        let (x_lo, x_hi) = bounds(xs);
        let (mut y_lo, mut y_hi) = self
            .y_range
            .unwrap_or_else(|| bounds(self.series.iter().flat_map(|s| s.y.iter().copied())));
        if y_lo == y_hi {
            y_lo -= 0.5;
            y_hi += 0.5;
        }
        let x_hi = if x_hi > x_lo { x_hi } else { x_lo + 1.0 };
        let plot_w = WIDTH - MARGIN_L - MARGIN_R;
        let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
        let py = |y: f64| MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            MARGIN_L + plot_w / 2.0,
            escape(&self.title)
        );

        for t in nice_ticks(x_lo, x_hi, 8) {
            let x = px(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                MARGIN_T,
                MARGIN_T + plot_h,
                MARGIN_T + plot_h + 16.0,
                fmt_tick(t)
            );
        }
        for t in nice_ticks(y_lo, y_hi, 6) {
            let y = py(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                MARGIN_L + plot_w,
                MARGIN_L - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_L + plot_w / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            MARGIN_T + plot_h / 2.0,
            MARGIN_T + plot_h / 2.0,
            escape(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let stride = s.x.len().div_ceil(MAX_POINTS).max(1);
            let mut pts = String::new();
            for (k, (x, y)) in s.x.iter().zip(&s.y).enumerate() {
                if k % stride == 0 || k + 1 == s.x.len() {
                    let _ = write!(pts, "{:.2},{:.2} ", px(*x), py(y.clamp(y_lo, y_hi)));
                }
            }
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{}"/>"#,
                pts.trim_end()
            );
            let ly = MARGIN_T + 12.0 + 18.0 * i as f64;
            let lx = MARGIN_L + plot_w + 12.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 24.0,
                lx + 30.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold(None, |acc: Option<(f64, f64)>, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
        .unwrap_or((0.0, 1.0))
}

/// One curve of a figure: column `column` of the CSV at `csv`, against `t`.
#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub csv: PathBuf,
    pub column: String,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct FigureSpec {
    pub file: PathBuf,
    pub title: String,
    pub y_label: String,
    pub y_range: Option<(f64, f64)>,
    pub curves: Vec<Curve>,
}

/// Renders each figure to its SVG file. Every referenced CSV must exist and
/// hold at least one data row.
pub fn render_plots(specs: &[FigureSpec]) -> Result<Vec<PathBuf>> {
    let mut cache: HashMap<PathBuf, CsvTable> = HashMap::new();
    let mut written = Vec::with_capacity(specs.len());
    for spec in specs {
        if spec.curves.is_empty() {
            return Err(Error::MissingArtifact(format!("{}: no curves", spec.file.display())));
        }
        let mut series = Vec::with_capacity(spec.curves.len());
        for curve in &spec.curves {
            if !cache.contains_key(&curve.csv) {
                cache.insert(curve.csv.clone(), read_csv(&curve.csv)?);
            }
            let table = &cache[&curve.csv];
            if table.rows.is_empty() {
                return Err(Error::MissingArtifact(format!("{} has no rows", curve.csv.display())));
            }
            let missing = || Error::MissingArtifact(format!("column `{}` in {}", curve.column, curve.csv.display()));
            series.push(Series {
                label: curve.label.clone(),
                x: table.column("t").ok_or_else(missing)?,
                y: table.column(&curve.column).ok_or_else(missing)?,
                dashed: curve.dashed,
            });
        }
        let plot = LinePlot {
            title: spec.title.clone(),
            x_label: "time (days)".into(),
            y_label: spec.y_label.clone(),
            series,
            y_range: spec.y_range,
        };
        std::fs::write(&spec.file, plot.to_svg()).map_err(|e| Error::io(&spec.file, e))?;
        written.push(spec.file.clone());
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = nice_ticks(0.0, 100.0, 8);
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(t.last(), Some(&100.0));
        assert!(t.windows(2).all(|w| (w[1] - w[0] - 20.0).abs() < 1e-12));
        let t = nice_ticks(0.0, 1.0, 5);
        assert_eq!(t.len(), 6);
        assert!(t.iter().enumerate().all(|(i, v)| (v - 0.2 * i as f64).abs() < 1e-12));
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let plot = LinePlot {
            title: "a < b".into(),
            x_label: "time (days)".into(),
            y_label: "u".into(),
            series: (0..3)
                .map(|i| Series {
                    label: format!("s{i}"),
                    x: vec![0.0, 1.0, 2.0],
                    y: vec![0.0, 0.5 * i as f64, 1.0],
                    dashed: i == 1,
                })
                .collect(),
            y_range: Some((0.0, 1.0)),
        };
        let svg = plot.to_svg();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn empty_trajectory_is_missing_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("empty.csv");
        std::fs::write(&csv, "t,S_h,I_h,S_v,I_v,u,lambda1,lambda2,lambda3,lambda4\n").unwrap();
        let spec = FigureSpec {
            file: dir.path().join("x_control.svg"),
            title: "control".into(),
            y_label: "u".into(),
            y_range: None,
            curves: vec![Curve { label: "u".into(), csv, column: "u".into(), dashed: false }],
        };
        assert!(matches!(render_plots(&[spec]), Err(Error::MissingArtifact(_))));
    }
}
