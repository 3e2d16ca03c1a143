//! SVG power curves: one line per number of lines `n`, power against `m`.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::model::PowerTable;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 120.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;
const Y_TICKS: usize = 5;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Renders `table` as a deterministic SVG document.
///
/// Power is drawn as a proportion, clipped to `y_range`, with a dashed
/// reference line at `target_power`.
pub fn render_power_plot(
    table: &PowerTable,
    target_power: f64,
    y_range: (f64, f64),
) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::invalid("table", "cannot plot an empty power table"));
    }
    let (lo, hi) = y_range;
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::invalid(
            "y_range",
            "y range must satisfy 0 <= lo < hi <= 1",
        ));
    }
    let ms = table.m_values();
    let (m_min, m_max) = (ms[0] as f64, ms[ms.len() - 1] as f64);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |m: f64| {
        if m_max > m_min {
            LEFT + plot_w * (m - m_min) / (m_max - m_min)
        } else {
            LEFT + plot_w / 2.0
        }
    };
    let y_of = |p: f64| TOP + plot_h * (1.0 - (p.clamp(lo, hi) - lo) / (hi - lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    // Axes.
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP, TOP + plot_h);
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2} {y0:.2} L{x0:.2} {y1:.2} L{x1:.2} {y1:.2}" fill="none" stroke="black"/>"#
    );
    for &m in &ms {
        let x = x_of(m as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{m}</text>"#,
            y1 + 5.0,
            y1 + 19.0
        );
    }
    for k in 0..=Y_TICKS {
        let v = lo + (hi - lo) * k as f64 / Y_TICKS as f64;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Animals per arm per PDX line (m)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Power</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    if (lo..=hi).contains(&target_power) {
        let y = y_of(target_power);
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="black" stroke-dasharray="6,4"/>"#
        );
    }

    // Series and legend.
    for (i, n) in table.n_values().into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points: Vec<(f64, f64)> = table
            .rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| (x_of(r.m as f64), y_of(r.power())))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coords: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{x:.2},{y:.2}"))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-n="{n}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        for (x, y) in &points {
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#
            );
        }
        let ly = TOP + 12.0 + 18.0 * i as f64;
        let lx = x1 + 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">n = {n}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
