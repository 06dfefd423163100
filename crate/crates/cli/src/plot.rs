//! Line plot of mean MDI against domain size, as a standalone SVG.

use std::fmt::Write as _;

use crate::io::SummaryRow;

const COLORS: [&str; 8] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"];
const PANEL_W: f64 = 260.0;
const PANEL_H: f64 = 200.0;
const MARGIN: f64 = 45.0;
const LEGEND_H: f64 = 30.0;

fn unique<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for it in items {
        if !out.contains(&it) {
            out.push(it);
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One panel per (pattern, drift), one line per estimator, y axis fixed to `[0, 1]`.
pub fn mdi_curves_svg(rows: &[SummaryRow]) -> String {
    let patterns = unique(rows.iter().map(|r| r.pattern.clone()));
    let drifts = unique(rows.iter().map(|r| r.drift.clone()));
    let estimators = unique(rows.iter().map(|r| r.estimator.clone()));
    let mut domains = unique(rows.iter().map(|r| r.domain));
    domains.sort_by(f64::total_cmp);
    let (dmin, dmax) = match (domains.first(), domains.last()) {
        (Some(&a), Some(&b)) if a < b => (a, b),
        (Some(&a), _) => (a - 1.0, a + 1.0),
        _ => (0.0, 1.0),
    };

    let cell_w = PANEL_W + 2.0 * MARGIN;
    let cell_h = PANEL_H + 2.0 * MARGIN;
    let width = cell_w * drifts.len().max(1) as f64;
    let height = cell_h * patterns.len().max(1) as f64 + LEGEND_H;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (pi, pattern) in patterns.iter().enumerate() {
        for (di, drift) in drifts.iter().enumerate() {
            let ox = di as f64 * cell_w + MARGIN;
            let oy = pi as f64 * cell_h + MARGIN;
            let x = |d: f64| ox + (d - dmin) / (dmax - dmin) * PANEL_W;
            let y = |m: f64| oy + (1.0 - m.clamp(0.0, 1.0)) * PANEL_H;
            let _ = writeln!(
                svg,
                r#"<rect x="{ox}" y="{oy}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle">{} / drift {}</text>"#,
                ox + PANEL_W / 2.0,
                oy - 8.0,
                escape(pattern),
                escape(drift)
            );
            for k in 0..=4 {
                let m = k as f64 / 4.0;
                let _ = writeln!(
                    svg,
                    r##"<line x1="{ox}" x2="{}" y1="{yy}" y2="{yy}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{m:.2}</text>"##,
                    ox + PANEL_W,
                    ox - 4.0,
                    y(m) + 4.0,
                    yy = y(m)
                );
            }
            for &d in &domains {
                let _ = writeln!(
                    svg,
                    r#"<text x="{}" y="{}" text-anchor="middle">{d}</text>"#,
                    x(d),
                    oy + PANEL_H + 14.0
                );
            }
            for (ei, est) in estimators.iter().enumerate() {
                let mut pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| &r.pattern == pattern && &r.drift == drift && &r.estimator == est)
                    .filter_map(|r| r.mean.map(|m| (r.domain, m)))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                if pts.is_empty() {
                    continue;
                }
                let color = COLORS[ei % COLORS.len()];
                let coords: Vec<String> = pts.iter().map(|&(d, m)| format!("{:.2},{:.2}", x(d), y(m))).collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                    coords.join(" ")
                );
                for &(d, m) in &pts {
                    let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, x(d), y(m));
                }
            }
        }
    }

    let ly = height - LEGEND_H / 2.0;
    for (ei, est) in estimators.iter().enumerate() {
        let lx = MARGIN + ei as f64 * 120.0;
        let color = COLORS[ei % COLORS.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 22.0,
            ly + 4.0,
            escape(est)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
