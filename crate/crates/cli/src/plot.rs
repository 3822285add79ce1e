//! Minimal log-log scatter plot as standalone SVG.

use std::fmt::Write as _;

pub struct Point {
    pub x: f64,
    pub y: f64,
    pub y_err: f64,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 70.0;

fn decades(values: impl Iterator<Item = f64>) -> (i32, i32) {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0, 1);
    }
    let a = lo.log10().floor() as i32;
    let b = (hi.log10().ceil() as i32).max(a + 1);
    (a, b)
}

/// Points with non-positive coordinates are skipped.
pub fn log_log_scatter(points: &[Point], x_label: &str, y_label: &str) -> String {
    let (x0, x1) = decades(points.iter().map(|p| p.x));
    let (y0, y1) = decades(points.iter().flat_map(|p| [p.y, p.y - p.y_err, p.y + p.y_err]));
    let sx = |x: f64| MARGIN + (x.log10() - x0 as f64) / (x1 - x0) as f64 * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y.log10() - y0 as f64) / (y1 - y0) as f64 * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for k in x0..=x1 {
        let x = sx(10f64.powi(k));
        let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{bottom}" x2="{x:.1}" y2="{}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">1e{k}</text>"#, bottom + 20.0);
    }
    for k in y0..=y1 {
        let y = sy(10f64.powi(k));
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.1}" x2="{left}" y2="{y:.1}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">1e{k}</text>"#, left - 8.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for p in points.iter().filter(|p| p.x > 0.0 && p.y > 0.0) {
        let (cx, cy) = (sx(p.x), sy(p.y));
        if p.y_err > 0.0 && p.y_err.is_finite() {
            let lo = sy((p.y - p.y_err).max(10f64.powi(y0)));
            let hi = sy(p.y + p.y_err);
            let _ = writeln!(s, r#"<line x1="{cx:.1}" y1="{lo:.1}" x2="{cx:.1}" y2="{hi:.1}" stroke="steelblue"/>"#);
        }
        let _ = writeln!(s, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="4" fill="steelblue"/>"#);
    }
    s.push_str("</svg>\n");
    s
}
