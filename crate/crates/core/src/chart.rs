//! Deterministic SVG line charts for ingested loss tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ingest::{LossTable, Reports};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

impl LineChart {
    pub fn render(&self) -> String {
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let pts = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter().copied())
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_x || *x > 0.0))
        };
        let (x0, x1) = range(pts().map(|(x, _)| tx(x)));
        let (y0, y1) = range(pts().map(|(_, y)| y));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (tx(x) - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let px = LEFT + f * pw;
            let label = if self.log_x { 10f64.powf(xv) } else { xv };
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 20.0,
                tick(label)
            );
            let yv = y0 + f * (y1 - y0);
            let py = TOP + ph - f * ph;
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 5.0,
                LEFT - 8.0,
                py + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let coords: Vec<String> = series
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_x || *x > 0.0))
                .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                coords.join(" ")
            );
            for c in &coords {
                let (cx, cy) = c.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
            }
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = WIDTH - RIGHT + 15.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 20.0,
                lx + 25.0,
                ly + 4.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// The four standard charts as `(file name, svg)` pairs:
/// loss against size per period, cross loss against test period, equivalent
/// size against training period, and effectiveness against elapsed periods.
pub fn render_charts(table: &LossTable, reports: &Reports) -> Result<Vec<(String, String)>> {
    if reports.reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to chart".into()));
    }
    let idx = |p: &str| table.period_index(p).unwrap_or(0) as f64;
    let largest = reports
        .reports
        .iter()
        .map(|r| r.train_size)
        .fold(f64::NEG_INFINITY, f64::max);

    let fig4 = LineChart {
        title: "Learning curves".into(),
        x_label: "training size".into(),
        y_label: "loss (nats)".into(),
        log_x: true,
        series: table
            .test_periods()
            .iter()
            .map(|p| Series {
                name: p.clone(),
                points: table.diagonal_points(p).iter().map(|q| (q.n, q.mean_loss)).collect(),
            })
            .collect(),
    };

    let mut cross: BTreeMap<usize, Series> = BTreeMap::new();
    let mut equiv: BTreeMap<usize, Series> = BTreeMap::new();
    for r in reports.reports.iter().filter(|r| r.train_size == largest) {
        let (i, j) = (idx(&r.train_period), idx(&r.test_period));
        cross
            .entry(i as usize)
            .or_insert_with(|| Series { name: r.train_period.clone(), points: Vec::new() })
            .points
            .push((j, r.mean_loss));
        if let Some(e) = r.equiv_size {
            equiv
                .entry(j as usize)
                .or_insert_with(|| Series { name: r.test_period.clone(), points: Vec::new() })
                .points
                .push((i, e));
        }
    }
    let sorted = |m: BTreeMap<usize, Series>| -> Vec<Series> {
        m.into_values()
            .map(|mut s| {
                s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
                s
            })
            .collect()
    };
    let fig5 = LineChart {
        title: format!("Cross-period loss at size {}", tick(largest)),
        x_label: "test period index".into(),
        y_label: "loss (nats)".into(),
        log_x: false,
        series: sorted(cross),
    };
    let fig6 = LineChart {
        title: format!("Equivalent size at size {}", tick(largest)),
        x_label: "training period index".into(),
        y_label: "equivalent size".into(),
        log_x: false,
        series: sorted(equiv),
    };

    let mut sizes: Vec<f64> = reports.reports.iter().map(|r| r.train_size).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    let fig7 = LineChart {
        title: "Effectiveness over elapsed periods".into(),
        x_label: "elapsed periods".into(),
        y_label: "effectiveness".into(),
        log_x: false,
        series: sizes
            .iter()
            .map(|n| Series {
                name: format!("n={}", tick(*n)),
                points: reports
                    .effectiveness_by_elapsed(table, *n)
                    .into_iter()
                    .map(|(k, e)| (k as f64, e))
                    .collect(),
            })
            .collect(),
    };
    Ok(vec![
        ("fig4.svg".into(), fig4.render()),
        ("fig5.svg".into(), fig5.render()),
        ("fig6.svg".into(), fig6.render()),
        ("fig7.svg".into(), fig7.render()),
    ])
}
