//! Plain-text artifacts: spectrum CSV and an SVG bar plot.

use crate::spectrum::EigenPair;
use std::fmt::Write;

pub fn spectrum_csv(pairs: &[EigenPair]) -> String {
    let mut out = String::from("index,lambda,residual\n");
    for (i, p) in pairs.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{:e}", p.lambda, p.residual);
    }
    out
}

/// Bars for the first `max_bars` eigenvalues with a dashed line at
/// `reference`.
pub fn spectrum_svg(lambdas: &[f64], reference: f64, max_bars: usize, title: &str) -> String {
    let bars = &lambdas[..lambdas.len().min(max_bars)];
    let (w, h) = (640.0, 360.0);
    let (left, right, top, bottom) = (56.0, 16.0, 36.0, 40.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let top_value = bars.iter().copied().fold(reference, f64::max).max(1e-12) * 1.1;
    let y = |v: f64| top + plot_h * (1.0 - v.max(0.0) / top_value);
    let slot = plot_w / bars.len().max(1) as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        top + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        top + plot_h,
        left + plot_w
    );
    for tick in 0..=4 {
        let v = top_value * tick as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            left - 6.0,
            y(v) + 4.0
        );
    }
    for (i, &l) in bars.iter().enumerate() {
        let x = left + slot * (i as f64 + 0.15);
        let _ = writeln!(
            s,
            r##"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a78b5"/>"##,
            y(l),
            slot * 0.7,
            top + plot_h - y(l)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{i}</text>"#,
            x + slot * 0.35,
            top + plot_h + 16.0
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{left}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="#c03030" stroke-dasharray="6 4"/>"##,
        y(reference),
        left + plot_w
    );
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{:.2}" text-anchor="end" fill="#c03030">λ = {reference}</text>"##,
        left + plot_w,
        y(reference) - 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">eigenvalue index</text>"#,
        left + plot_w / 2.0,
        h - 8.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
