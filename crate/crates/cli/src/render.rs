//! Minimal static SVG renderers for reconstruction comparisons.

use nalgebra::DVector;
use rangereg::pde::{Field, Grid2D, GridShape};
use std::sync::Arc;

/// Side-by-side nodal heatmaps (truth left, reconstruction right) for
/// square-grid fields.
pub fn field_pair_svg(grid: &Arc<Grid2D>, truth: &Field, recon: &Field) -> String {
    let n = match grid.shape() {
        GridShape::Square { n } => n,
        GridShape::Disk { .. } => 0,
    };
    let cell = 8.0;
    let pad = 30.0;
    let panel = n as f64 * cell;
    let w = 2.0 * panel + 3.0 * pad;
    let h = panel + 2.0 * pad + 20.0;
    let lo = truth.values().min().min(recon.values().min());
    let hi = truth.values().max().max(recon.values().max());
    let span = (hi - lo).max(1e-300);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    let mut panel_at = |field: &Field, x_off: f64, label: &str, svg: &mut String| {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"13\">{label}</text>\n",
            x_off,
            pad - 8.0
        ));
        for iy in 0..n {
            for ix in 0..n {
                let v = field.values()[ix + iy * n];
                let t = ((v - lo) / span).clamp(0.0, 1.0);
                let r = (255.0 * t) as u8;
                let b = (255.0 * (1.0 - t)) as u8;
                let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8;
                svg.push_str(&format!(
                    "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({r},{g},{b})\"/>\n",
                    x_off + ix as f64 * cell,
                    pad + (n - 1 - iy) as f64 * cell
                ));
            }
        }
    };
    panel_at(truth, pad, "truth", &mut svg);
    panel_at(recon, 2.0 * pad + panel, "reconstruction", &mut svg);
    svg.push_str(&format!(
        "<text x=\"{pad}\" y=\"{}\" font-size=\"11\">range [{lo:.4}, {hi:.4}]</text>\n",
        h - 8.0
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Two overlaid coefficient series (index against value).
pub fn series_pair_svg(truth: &DVector<f64>, recon: &DVector<f64>) -> String {
    let (w, h) = (640.0, 360.0);
    let margin = 40.0;
    let n = truth.len().max(recon.len());
    let lo = truth.min().min(recon.min());
    let hi = truth.max().max(recon.max());
    let span = (hi - lo).max(1e-300);
    let px = |i: usize| margin + i as f64 / (n.max(2) - 1) as f64 * (w - 2.0 * margin);
    let py = |v: f64| h - margin - (v - lo) / span * (h - 2.0 * margin);
    let poly = |v: &DVector<f64>| -> String {
        v.iter()
            .enumerate()
            .map(|(i, &x)| format!("{:.1},{:.1}", px(i), py(x)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
            "<polyline points=\"{t}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
            "<polyline points=\"{r}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"5 3\"/>\n",
            "<text x=\"{lx}\" y=\"20\" font-size=\"12\" fill=\"#1f77b4\">truth</text>\n",
            "<text x=\"{lx}\" y=\"36\" font-size=\"12\" fill=\"#d62728\">reconstruction</text>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        t = poly(truth),
        r = poly(recon),
        lx = w - 130.0
    )
}
