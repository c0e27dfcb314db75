//! Box plots of per-point KLoM against ensemble size as a standalone SVG.

use std::fmt::Write;

use klom::metrics::{SensitivityRow, Split};

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 260.0;
const MARGIN: f64 = 48.0;

fn nice_ceiling(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let step = 10f64.powf(x.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * step)
        .find(|&v| v >= x)
        .unwrap_or(10.0 * step)
}

/// One panel per split in `panels`, boxes per ensemble size, and the 95th
/// percentile as a red marker.
pub fn sensitivity_svg(title: &str, panels: &[(Split, Vec<SensitivityRow>)]) -> String {
    let width = MARGIN + panels.len() as f64 * (PANEL_W + MARGIN);
    let height = PANEL_H + 2.5 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#,
        width / 2.0
    );
    for (p, (split, rows)) in panels.iter().enumerate() {
        let x0 = MARGIN + p as f64 * (PANEL_W + MARGIN);
        let y0 = 1.2 * MARGIN;
        let top = nice_ceiling(
            rows.iter()
                .map(|r| r.summary.whisker_high.max(r.summary.p95))
                .fold(0.0, f64::max),
        );
        let y = |v: f64| y0 + PANEL_H * (1.0 - (v / top).clamp(0.0, 1.0));
        let _ = writeln!(
            svg,
            r##"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{split}</text>"#,
            x0 + PANEL_W / 2.0,
            y0 - 6.0
        );
        for t in 0..=4 {
            let v = top * t as f64 / 4.0;
            let _ = writeln!(
                svg,
                r##"<line x1="{}" y1="{yy}" x2="{x0}" y2="{yy}" stroke="#444"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                y(v) + 4.0,
                crate::format::sig6(v),
                yy = y(v),
            );
        }
        let slot = PANEL_W / rows.len().max(1) as f64;
        for (i, row) in rows.iter().enumerate() {
            let s = &row.summary;
            let cx = x0 + slot * (i as f64 + 0.5);
            let half = slot * 0.3;
            let _ = writeln!(
                svg,
                concat!(
                    r##"<line x1="{cx}" y1="{wl}" x2="{cx}" y2="{wh}" stroke="#333"/>"##,
                    r##"<line x1="{a}" y1="{wl}" x2="{b}" y2="{wl}" stroke="#333"/>"##,
                    r##"<line x1="{a}" y1="{wh}" x2="{b}" y2="{wh}" stroke="#333"/>"##,
                    r##"<rect x="{l}" y="{q3}" width="{w}" height="{h}" fill="#9ecae1" stroke="#333"/>"##,
                    r##"<line x1="{l}" y1="{med}" x2="{r}" y2="{med}" stroke="#08306b" stroke-width="2"/>"##,
                    r##"<circle cx="{cx}" cy="{p95}" r="3" fill="#d62728"/>"##,
                    r#"<text x="{cx}" y="{lab}" text-anchor="middle">{n}</text>"#
                ),
                cx = cx,
                wl = y(s.whisker_low),
                wh = y(s.whisker_high),
                a = cx - half / 2.0,
                b = cx + half / 2.0,
                l = cx - half,
                r = cx + half,
                w = 2.0 * half,
                q3 = y(s.q3),
                h = y(s.q1) - y(s.q3),
                med = y(s.median),
                p95 = y(s.p95),
                lab = y0 + PANEL_H + 14.0,
                n = row.n_models,
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">ensemble size N</text>"#,
            x0 + PANEL_W / 2.0,
            y0 + PANEL_H + 30.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
