//! Small hand-written SVG charts.

use std::fmt::Write as _;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Blue (−1) to white (0) to red (+1).
fn diverging(v: f64) -> String {
    let t = v.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Heatmap of a square matrix with values in [−1, 1].
pub fn heatmap(matrix: &[Vec<f64>], labels: &[String], title: &str) -> String {
    let n = matrix.len();
    let cell = 12.0;
    let margin = 90.0;
    let size = margin + cell * n as f64 + 10.0;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{}" font-family="sans-serif" font-size="8">"#, size + 20.0).unwrap();
    writeln!(s, r#"<text x="{margin}" y="14" font-size="12">{}</text>"#, escape(title)).unwrap();
    for (i, row) in matrix.iter().enumerate() {
        let y = margin + cell * i as f64;
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, margin - 3.0, y + cell * 0.75, escape(&labels[i])).unwrap();
        for (j, &v) in row.iter().enumerate() {
            let x = margin + cell * j as f64;
            writeln!(s, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}"/>"#, diverging(v)).unwrap();
        }
    }
    for (j, l) in labels.iter().enumerate() {
        let x = margin + cell * j as f64 + cell * 0.75;
        writeln!(s, r#"<text transform="translate({x},{}) rotate(-90)">{}</text>"#, margin - 3.0, escape(l)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

/// Labelled scatter plot; points sharing a `class` share a colour.
pub fn scatter(points: &[(f64, f64)], labels: &[String], class: &[usize], title: &str, axes: (&str, &str)) -> String {
    let (w, h, pad) = (480.0, 400.0, 40.0);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * pad);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="9">"#).unwrap();
    writeln!(s, r#"<text x="{pad}" y="16" font-size="12">{}</text>"#, escape(title)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 8.0, escape(axes.0)).unwrap();
    writeln!(s, r#"<text transform="translate(12,{}) rotate(-90)" text-anchor="middle">{}</text>"#, h / 2.0, escape(axes.1)).unwrap();
    for ((&(x, y), l), &c) in points.iter().zip(labels).zip(class) {
        let color = PALETTE[c % PALETTE.len()];
        writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y)).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#, sx(x) + 4.0, sy(y) - 3.0, escape(l)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
