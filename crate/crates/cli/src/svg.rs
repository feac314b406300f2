//! Minimal SVG line plots.

use std::fmt::Write as _;

use lrlab_core::TimeSeries;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// All series on shared linear axes. Non-finite values are skipped.
pub fn line_plot(title: &str, series: &[&TimeSeries]) -> String {
    let pts = series
        .iter()
        .flat_map(|s| s.times.iter().zip(&s.values))
        .filter(|(t, v)| t.is_finite() && v.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (&t, &v) in pts {
        x0 = x0.min(t);
        x1 = x1.max(t);
        y0 = y0.min(v);
        y1 = y1.max(v);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |t: f64| PAD + (t - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{PAD},{PAD}V{}H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(out, r#"<text x="{PAD}" y="{}">{x0:.3}</text>"#, H - PAD + 16.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{x1:.3} ps</text>"#, W - PAD, H - PAD + 16.0);
    let _ = writeln!(out, r#"<text x="4" y="{}">{y0:.3e}</text>"#, H - PAD);
    let _ = writeln!(out, r#"<text x="4" y="{}">{y1:.3e}</text>"#, PAD);
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        let mut pen_up = true;
        for (&t, &v) in s.times.iter().zip(&s.values) {
            if !(t.is_finite() && v.is_finite()) {
                pen_up = true;
                continue;
            }
            let _ = write!(d, "{}{:.2},{:.2}", if pen_up { "M" } else { "L" }, sx(t), sy(v));
            pen_up = false;
        }
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            PAD + 8.0,
            PAD + 14.0 * (k as f64 + 1.0),
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
