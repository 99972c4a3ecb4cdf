//! Minimal log-log plot writer.

use std::fmt::Write;

use super::fit::ExponentFit;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;

/// Plots `(n, mean)` points on log-log axes with decade ticks and, when
/// present, the fitted line `exp(intercept) n^slope`.
pub fn loglog_svg(title: &str, points: &[(usize, f64)], fit: Option<&ExponentFit>) -> String {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, v)| *n > 0 && *v > 0.0)
        .map(|&(n, v)| ((n as f64).log10(), v.log10()))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    // at least one full decade on each axis so ticks appear
    x0 = x0.floor();
    x1 = x1.ceil().max(x0 + 1.0);
    y0 = y0.floor();
    y1 = y1.ceil().max(y0 + 1.0);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let _ = writeln!(
        s,
        r#"<path d="M{a},{b} L{c},{b} M{a},{b} L{a},{d}" stroke="black" fill="none"/>"#,
        a = sx(x0),
        b = sy(y0),
        c = sx(x1),
        d = sy(y1)
    );
    for k in x0 as i32..=x1 as i32 {
        let x = sx(k as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{b}" x2="{x}" y2="{c}" stroke="black"/><text x="{x}" y="{t}" font-family="sans-serif" font-size="12" text-anchor="middle">1e{k}</text>"#,
            b = sy(y0),
            c = sy(y0) + 6.0,
            t = sy(y0) + 22.0
        );
    }
    for k in y0 as i32..=y1 as i32 {
        let y = sy(k as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{a}" y1="{y}" x2="{b}" y2="{y}" stroke="black"/><text x="{t}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="end" dominant-baseline="middle">1e{k}</text>"#,
            a = sx(x0) - 6.0,
            b = sx(x0),
            t = sx(x0) - 10.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">n</text>"#,
        W / 2.0,
        H - 12.0
    );
    if let Some(f) = fit {
        let line = |x: f64| (f.intercept + f.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10;
        let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(x, _)| {
            (a.min(x), b.max(x))
        });
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="steelblue" stroke-dasharray="6 4"/>"#,
            sx(lo),
            sy(line(lo)),
            sx(hi),
            sy(line(hi))
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="end">slope {:.3} ± {:.3}</text>"#,
            W - PAD,
            PAD,
            f.slope,
            f.stderr
        );
    }
    for &(x, y) in &pts {
        let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="4" fill="firebrick"/>"#, sx(x), sy(y));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
