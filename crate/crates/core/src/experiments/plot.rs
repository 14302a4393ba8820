//! SVG line charts of sweep curves: one panel per metric, median line over
//! a shaded interquartile band.

use std::fmt::Write as _;

use super::sweep::SweepResult;
use crate::metrics::Metric;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 220.0;
const MARGIN_L: f64 = 52.0;
const MARGIN_R: f64 = 12.0;
const MARGIN_T: f64 = 26.0;
const MARGIN_B: f64 = 36.0;
const COLUMNS: usize = 3;

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { lo, hi, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn polyline(pts: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}

fn panel(out: &mut String, result: &SweepResult, metric: Metric, ox: f64, oy: f64) {
    let pts: Vec<(f64, f64, f64, f64)> = result
        .sigmas
        .iter()
        .zip(&result.curves[&metric])
        .filter_map(|(&s, p)| p.map(|p| (s, p.median, p.p25, p.p75)))
        .collect();
    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"##,
        ox + PANEL_W / 2.0,
        oy + 16.0,
        metric.label()
    );
    let (x0, x1) = (ox + MARGIN_L, ox + PANEL_W - MARGIN_R);
    let (y0, y1) = (oy + PANEL_H - MARGIN_B, oy + MARGIN_T);
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#888"/>"##,
        x1 - x0,
        y0 - y1
    );
    if pts.is_empty() {
        return;
    }
    let sx = Axis::new(result.sigmas[0], *result.sigmas.last().unwrap(), x0, x1);
    let lo = pts.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.3).fold(f64::NEG_INFINITY, f64::max);
    let sy = Axis::new(lo, hi, y0, y1);

    let mut band: Vec<(f64, f64)> = pts.iter().map(|p| (sx.map(p.0), sy.map(p.3))).collect();
    band.extend(pts.iter().rev().map(|p| (sx.map(p.0), sy.map(p.2))));
    let _ = writeln!(out, r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.5"/>"##, polyline(&band));
    let line: Vec<(f64, f64)> = pts.iter().map(|p| (sx.map(p.0), sy.map(p.1))).collect();
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="1.5"/>"##,
        polyline(&line)
    );

    for (v, y) in [(sy.lo, y0), (sy.hi, y1)] {
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{v:.3}</text>"##,
            x0 - 4.0,
            y + 3.0
        );
    }
    for (v, x) in [(sx.lo, x0), (sx.hi, x1)] {
        let _ = writeln!(
            out,
            r##"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{v}</text>"##,
            y0 + 13.0
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">σ (px)</text>"##,
        (x0 + x1) / 2.0,
        y0 + 28.0
    );
}

/// All six metric curves of a sweep as a standalone SVG document.
pub fn sweep_svg(result: &SweepResult) -> String {
    let rows = Metric::ALL.len().div_ceil(COLUMNS);
    let (w, h) = (PANEL_W * COLUMNS as f64, PANEL_H * rows as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"##
    );
    let _ = writeln!(out, r##"<rect width="{w}" height="{h}" fill="white"/>"##);
    for (i, &m) in Metric::TABLE_ORDER.iter().enumerate() {
        let ox = (i % COLUMNS) as f64 * PANEL_W;
        let oy = (i / COLUMNS) as f64 * PANEL_H;
        panel(&mut out, result, m, ox, oy);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::sweep::CurvePoint;
    use std::collections::BTreeMap;

    #[test]
    fn svg_has_one_line_per_metric() {
        let sigmas = vec![1.0, 2.0, 3.0];
        let mut curves = BTreeMap::new();
        for m in Metric::ALL {
            let pts = sigmas
                .iter()
                .map(|&s| Some(CurvePoint { median: s, p25: s - 0.5, p75: s + 0.5, n: 4 }))
                .collect();
            curves.insert(m, pts);
        }
        let r = SweepResult { sigmas, curves, pairs: vec![] };
        let svg = sweep_svg(&r);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 6);
        assert!(svg.contains(">sAUC<"));
    }
}
