//! Minimal SVG plots: line profiles, error maps and a metrics table.

use std::fmt::Write;

use thermopipe::grid::Grid2D;

/// Longest side of a rendered error map, in cells.
const MAX_CELLS: usize = 160;

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn polyline(values: &[f32], x0: f64, y0: f64, pw: f64, ph: f64, lo: f64, hi: f64, color: &str) -> String {
    let n = values.len().max(2) - 1;
    let pts: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = x0 + pw * i as f64 / n as f64;
            let y = y0 + ph * (1.0 - (v as f64 - lo) / (hi - lo));
            format!("{x:.2},{y:.2}")
        })
        .collect();
    format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n", pts.join(" "))
}

/// Middle row of `gt` and `est` plotted together.
pub fn line_profile(id: &str, gt: &Grid2D, est: &Grid2D) -> String {
    let (w, h) = (640.0, 320.0);
    let (x0, y0, pw, ph) = (60.0, 30.0, 560.0, 240.0);
    let g = gt.row(gt.height() / 2);
    let e = est.row(est.height() / 2);
    let all = g.iter().chain(e).map(|&v| v as f64).filter(|v| v.is_finite());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let mut s = header(w, h);
    let _ = writeln!(s, "<text x=\"{x0}\" y=\"18\">{} middle row (°C)</text>", escape(id));
    let _ = writeln!(s, "<rect x=\"{x0}\" y=\"{y0}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{hi:.2}</text>", x0 - 4.0, y0 + 10.0);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{lo:.2}</text>", x0 - 4.0, y0 + ph);
    let _ = writeln!(s, "<text x=\"{x0}\" y=\"{}\">0</text>", y0 + ph + 16.0);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
        x0 + pw,
        y0 + ph + 16.0,
        g.len().max(1) - 1
    );
    s.push_str(&polyline(g, x0, y0, pw, ph, lo, hi, "#1f77b4"));
    s.push_str(&polyline(e, x0, y0, pw, ph, lo, hi, "#d62728"));
    let ly = y0 + ph + 36.0;
    let _ = writeln!(
        s,
        "<line x1=\"{x0}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"#1f77b4\" stroke-width=\"2\"/>",
        x0 + 20.0
    );
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">ground truth</text>", x0 + 26.0, ly + 4.0);
    let _ = writeln!(
        s,
        "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"#d62728\" stroke-width=\"2\"/>",
        x0 + 140.0,
        x0 + 160.0
    );
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">estimate</text>", x0 + 166.0, ly + 4.0);
    s.push_str("</svg>\n");
    s
}

/// Blue for negative, white for zero, red for positive; `t` in `[-1, 1]`.
fn diverging(t: f64) -> (u8, u8, u8) {
    let t = if t.is_finite() { t.clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |a: f64| (255.0 * (1.0 - a)).round() as u8;
    if t >= 0.0 {
        (255, fade(t), fade(t))
    } else {
        (fade(-t), fade(-t), 255)
    }
}

/// `est − gt` per pixel, block-averaged down to at most [`MAX_CELLS`] per side.
pub fn error_map(id: &str, gt: &Grid2D, est: &Grid2D) -> String {
    let (h, w) = gt.dims();
    let step = h.max(w).div_ceil(MAX_CELLS).max(1);
    let (ch, cw) = (h.div_ceil(step), w.div_ceil(step));
    let mut cells = vec![0.0; ch * cw];
    for cy in 0..ch {
        for cx in 0..cw {
            let (mut acc, mut n) = (0.0, 0.0);
            for y in cy * step..((cy + 1) * step).min(h) {
                for x in cx * step..((cx + 1) * step).min(w) {
                    acc += est.get(y, x) as f64 - gt.get(y, x) as f64;
                    n += 1.0;
                }
            }
            cells[cy * cw + cx] = acc / n;
        }
    }
    let limit = cells.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if limit > 0.0 { limit } else { 1.0 };
    let px = (480.0 / cw.max(ch) as f64).clamp(1.0, 24.0);
    let (x0, y0) = (20.0, 30.0);
    let mut s = header(x0 * 2.0 + px * cw as f64, y0 + px * ch as f64 + 30.0);
    let _ = writeln!(s, "<text x=\"{x0}\" y=\"18\">{} error (estimate − truth), ±{limit:.3} °C</text>", escape(id));
    s.push_str("<g shape-rendering=\"crispEdges\">\n");
    for cy in 0..ch {
        for cx in 0..cw {
            let (r, g, b) = diverging(cells[cy * cw + cx] / scale);
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{px:.2}\" height=\"{px:.2}\" fill=\"rgb({r},{g},{b})\"/>",
                x0 + px * cx as f64,
                y0 + px * cy as f64
            );
        }
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// Table with one line per row of `cells`; the first row is the header.
pub fn table(title: &str, cells: &[Vec<String>]) -> String {
    let cols = cells.first().map_or(0, Vec::len);
    let (cw, rh) = (110.0, 20.0);
    let w = 20.0 + cw * cols as f64;
    let h = 50.0 + rh * cells.len() as f64;
    let mut s = header(w, h);
    let _ = writeln!(s, "<text x=\"10\" y=\"20\" font-weight=\"bold\">{}</text>", escape(title));
    for (i, row) in cells.iter().enumerate() {
        let y = 44.0 + rh * i as f64;
        let weight = if i == 0 { " font-weight=\"bold\"" } else { "" };
        for (j, c) in row.iter().enumerate() {
            let _ = writeln!(s, "<text x=\"{}\" y=\"{y}\"{weight}>{}</text>", 10.0 + cw * j as f64, escape(c));
        }
    }
    s.push_str("</svg>\n");
    s
}
