//! Two-panel spectrogram: normalized description length on top, prominence
//! of the local minima below, sharing the `Δ` axis.

use std::fmt::Write;

use timescales::spectrum::Spectrum;

use crate::output::sig9;

const WIDTH: f64 = 720.0;
const PANEL: f64 = 200.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const GAP: f64 = 50.0;

struct Axis {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let hi = if hi > lo { hi } else { lo + 1.0 };
        Axis { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, s: &str) {
    let _ = writeln!(out, r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-size="11">{s}</text>"#);
}

fn frame(out: &mut String, xs: &Axis, ys: &Axis, label: &str) {
    let (x0, x1) = (xs.from, xs.to);
    let (y0, y1) = (ys.to, ys.from);
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    text(out, x0 - 6.0, y1 + 4.0, "end", &sig9(ys.lo));
    text(out, x0 - 6.0, y0 + 4.0, "end", &sig9(ys.hi));
    text(out, x0, y0 - 8.0, "start", label);
}

pub fn spectrogram(spec: &Spectrum) -> String {
    let deltas: Vec<f64> = spec.points.iter().map(|p| p.delta as f64).collect();
    let d_lo = deltas.first().copied().unwrap_or(1.0);
    let d_hi = deltas.last().copied().unwrap_or(1.0);
    let height = TOP + 2.0 * PANEL + GAP + 40.0;
    let xs = Axis::new(d_lo, d_hi, LEFT, WIDTH - RIGHT);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let norm_hi = spec.points.iter().map(|p| p.norm_bits).fold(0.0, f64::max);
    let top = Axis::new(0.0, norm_hi, TOP + PANEL, TOP);
    frame(&mut out, &xs, &top, "description length above minimum (bits)");
    let line: Vec<String> =
        spec.points.iter().map(|p| format!("{:.2},{:.2}", xs.map(p.delta as f64), top.map(p.norm_bits))).collect();
    let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#, line.join(" "));
    let mdl = xs.map(spec.mdl_delta as f64);
    let _ = writeln!(
        out,
        r#"<line x1="{mdl:.2}" y1="{:.1}" x2="{mdl:.2}" y2="{:.1}" stroke="firebrick" stroke-dasharray="4 3"/>"#,
        TOP,
        TOP + PANEL
    );

    let base = TOP + 2.0 * PANEL + GAP;
    let prom_hi = spec.minima.iter().map(|m| m.prominence).fold(0.0, f64::max);
    let bottom = Axis::new(0.0, prom_hi, base, base - PANEL);
    frame(&mut out, &xs, &bottom, "prominence of local minima (bits)");
    for m in &spec.minima {
        let x = xs.map(m.delta as f64);
        let y = bottom.map(m.prominence);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{base:.1}" x2="{x:.2}" y2="{y:.2}" stroke="black"/>"#);
        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="black"/>"#);
    }
    for m in spec.minima.iter().take(3) {
        text(&mut out, xs.map(m.delta as f64), bottom.map(m.prominence) - 6.0, "middle", &m.delta.to_string());
    }

    text(&mut out, LEFT, base + 16.0, "middle", &sig9(d_lo));
    text(&mut out, WIDTH - RIGHT, base + 16.0, "middle", &sig9(d_hi));
    text(&mut out, (LEFT + WIDTH - RIGHT) / 2.0, base + 32.0, "middle", "window size Δ");
    out.push_str("</svg>\n");
    out
}
