//! Static SVG line charts of sweep results.
//!
//! Rendering reads only `sweep.csv`, so re-rendering is idempotent. Each chart
//! plots the median over seeds against the swept axis, one polyline per noise
//! level. Axis values are placed at evenly spaced categorical positions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::io::write_atomic;

use super::analysis::median;
use super::sweep::{read_sweep_csv, SweepAxis, SweepMetrics, SweepRecord};

/// Values at or below this are drawn at the floor of log-scaled charts.
pub const LOG_FLOOR: f64 = 1e-18;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log10,
}

/// A metric column that can be charted.
#[derive(Debug, Clone, Copy)]
pub struct PlotMetric {
    pub name: &'static str,
    pub scale: Scale,
    pub extract: fn(&SweepMetrics) -> f64,
}

pub const PLOT_METRICS: [PlotMetric; 4] = [
    PlotMetric {
        name: "cmae",
        scale: Scale::Log10,
        extract: |m| m.cmae,
    },
    PlotMetric {
        name: "ncmae",
        scale: Scale::Log10,
        extract: |m| m.ncmae,
    },
    PlotMetric {
        name: "mlre_avg",
        scale: Scale::Linear,
        extract: |m| m.mlre_avg,
    },
    PlotMetric {
        name: "residual_frobenius",
        scale: Scale::Log10,
        extract: |m| m.residual_frobenius,
    },
];

/// One series: `(axis value, median)` pairs sorted by axis value.
pub type Series = Vec<(usize, f64)>;

/// Medians over seeds of successful records, keyed by the noise level's bit
/// pattern so that series order follows first appearance in `records`.
pub fn median_series(
    records: &[SweepRecord],
    axis: SweepAxis,
    metric: &PlotMetric,
) -> Vec<(f64, Series)> {
    let mut order: Vec<u64> = Vec::new();
    let mut groups: BTreeMap<(u64, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        let Some(m) = r.metrics() else { continue };
        let key = r.point.noise_sigma.to_bits();
        if !order.contains(&key) {
            order.push(key);
        }
        groups
            .entry((key, axis.value_of(&r.point)))
            .or_default()
            .push((metric.extract)(m));
    }
    order
        .into_iter()
        .map(|key| {
            let series = groups
                .iter()
                .filter(|((k, _), _)| *k == key)
                .filter_map(|((_, x), vals)| median(vals).map(|m| (*x, m)))
                .collect();
            (f64::from_bits(key), series)
        })
        .collect()
}

fn fmt_num(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64, scale: Scale) -> String {
    match scale {
        Scale::Log10 => format!("1e{}", v as i64),
        Scale::Linear => {
            if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
                format!("{v:.1e}")
            } else {
                format!("{v:.3}")
            }
        }
    }
}

/// Renders one chart as an SVG document.
pub fn render_chart(series: &[(f64, Series)], axis: SweepAxis, metric: &PlotMetric) -> String {
    let xs: Vec<usize> = {
        let mut xs: Vec<usize> = series
            .iter()
            .flat_map(|(_, s)| s.iter().map(|p| p.0))
            .collect();
        xs.sort_unstable();
        xs.dedup();
        xs
    };
    let transform = |v: f64| match metric.scale {
        Scale::Linear => v,
        Scale::Log10 => v.max(LOG_FLOOR).log10(),
    };
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| transform(p.1)))
        .collect();
    let (mut y_lo, mut y_hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        });
    if ys.is_empty() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if metric.scale == Scale::Log10 {
        y_lo = y_lo.floor();
        y_hi = y_hi.ceil();
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_pos = |x: usize| {
        let i = xs.iter().position(|&v| v == x).unwrap_or(0);
        if xs.len() <= 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (xs.len() - 1) as f64
        }
    };
    let y_pos = |y: f64| TOP + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let y_title = match metric.scale {
        Scale::Log10 => format!("median {} (log10)", metric.name),
        Scale::Linear => format!("median {}", metric.name),
    };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{} vs {}</text>"#,
        fmt_num(LEFT + plot_w / 2.0),
        metric.name,
        axis
    );
    // Axes.
    let _ = writeln!(
        svg,
        r#"<path d="M{l} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        l = fmt_num(LEFT),
        t = fmt_num(TOP),
        b = fmt_num(TOP + plot_h),
        r = fmt_num(LEFT + plot_w)
    );
    for &x in &xs {
        let px = fmt_num(x_pos(x));
        let _ = writeln!(
            svg,
            r#"<line x1="{px}" y1="{y0}" x2="{px}" y2="{y1}" stroke="black"/><text x="{px}" y="{ty}" text-anchor="middle">{x}</text>"#,
            y0 = fmt_num(TOP + plot_h),
            y1 = fmt_num(TOP + plot_h + 5.0),
            ty = fmt_num(TOP + plot_h + 20.0)
        );
    }
    let ticks: Vec<f64> = match metric.scale {
        Scale::Log10 => {
            let span = (y_hi - y_lo).round() as i64;
            let step = (span / 8).max(1);
            (0..=span / step)
                .map(|i| y_lo + (i * step) as f64)
                .collect()
        }
        Scale::Linear => (0..=5)
            .map(|i| y_lo + (y_hi - y_lo) * i as f64 / 5.0)
            .collect(),
    };
    for t in ticks {
        let py = fmt_num(y_pos(t));
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{py}" x2="{x1}" y2="{py}" stroke="#dddddd"/><text x="{tx}" y="{py}" text-anchor="end" dominant-baseline="middle">{label}</text>"##,
            x0 = fmt_num(LEFT),
            x1 = fmt_num(LEFT + plot_w),
            tx = fmt_num(LEFT - 6.0),
            label = tick_label(t, metric.scale)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        fmt_num(LEFT + plot_w / 2.0),
        fmt_num(HEIGHT - 15.0),
        axis
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        fmt_num(TOP + plot_h / 2.0),
        y_title
    );

    for (i, (sigma, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt_num(x_pos(x)), fmt_num(y_pos(transform(y)))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        for c in &coords {
            let (cx, cy) = c.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(svg, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{ly}" dominant-baseline="middle">sigma = {sigma}</text>"#,
            fmt_num(lx),
            fmt_num(lx + 20.0),
            fmt_num(lx + 26.0),
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders `<metric>_vs_<axis>.svg` for every charted metric into `out_dir`.
pub fn render_sweep_plots(
    csv_path: &Path,
    axis: SweepAxis,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let records = read_sweep_csv(csv_path)?;
    PLOT_METRICS
        .iter()
        .map(|metric| {
            let svg = render_chart(&median_series(&records, axis, metric), axis, metric);
            let path = out_dir.join(format!("{}_vs_{}.svg", metric.name, axis));
            write_atomic(&path, svg.as_bytes())?;
            Ok(path)
        })
        .collect()
}
