//! Report emission: the sweep table as CSV, a log-log rate plot as a
//! static SVG, and a JSON metadata echo. Output is byte-stable for
//! identical inputs (ordered maps, fixed float formatting, no timestamps).

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{BenchError, SweepReport};

/// Run metadata echoed into `meta.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepMeta {
    pub version: String,
    pub config_hash: String,
    pub scheme: String,
    pub problem: String,
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub config: crate::solve::RegConfig,
    /// Measured operator diagnostics (norm of K, Lipschitz quotients,
    /// tangential-cone observables and the like).
    pub diagnostics: std::collections::BTreeMap<String, f64>,
}

/// Writes `sweep.csv`, `rates.svg` (when fits exist) and `meta.json` into
/// `dir`, creating it if needed. Returns the list of files written.
pub fn emit_report(
    report: &SweepReport,
    meta: &SweepMeta,
    dir: &Path,
) -> Result<Vec<std::path::PathBuf>, BenchError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let csv_path = dir.join("sweep.csv");
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    writeln!(
        csv,
        "delta,seed,scheme,err_breg,err_norm,residual_K,norm_Px,Q_gap,alpha,n_stop,status"
    )?;
    for r in &report.rows {
        writeln!(
            csv,
            "{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.delta,
            r.seed,
            r.scheme,
            r.err_breg,
            r.err_norm,
            r.residual_k,
            r.norm_px,
            r.q_gap,
            r.alpha,
            r.n_stop,
            r.status
        )?;
    }
    csv.flush()?;
    written.push(csv_path);

    if !report.fitted.is_empty() {
        let svg_path = dir.join("rates.svg");
        std::fs::write(&svg_path, render_svg(report))?;
        written.push(svg_path);
    }

    let meta_path = dir.join("meta.json");
    let mut doc = serde_json::to_value(meta).expect("meta serialization cannot fail");
    let fits: serde_json::Value = serde_json::to_value(&report.fitted).unwrap();
    doc.as_object_mut().unwrap().insert("fitted".into(), fits);
    if report.fitted.is_empty() {
        doc.as_object_mut()
            .unwrap()
            .insert("note".into(), serde_json::Value::String("no fits; csv only".into()));
    }
    std::fs::write(&meta_path, serde_json::to_string_pretty(&doc).unwrap())?;
    written.push(meta_path);
    Ok(written)
}

const PLOT_COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Log-log scatter of the per-level medians with the fitted lines.
fn render_svg(report: &SweepReport) -> String {
    let (w, h) = (640.0, 480.0);
    let margin = 60.0;
    // Gather the plotted range over all finite positive medians.
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for pts in report.medians.values() {
        for &(d, v) in pts {
            if d > 0.0 && v > 0.0 && v.is_finite() {
                xs.push(d.log10());
                ys.push(v.log10());
            }
        }
    }
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if xs.is_empty() {
        svg.push_str("<text x=\"20\" y=\"40\">no positive data</text>\n</svg>\n");
        return svg;
    }
    let (x0, x1) = (min(&xs) - 0.2, max(&xs) + 0.2);
    let (y0, y1) = (min(&ys) - 0.4, max(&ys) + 0.4);
    let px = |lx: f64| margin + (lx - x0) / (x1 - x0) * (w - 2.0 * margin);
    let py = |ly: f64| h - margin - (ly - y0) / (y1 - y0) * (h - 2.0 * margin);
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        margin,
        h - margin,
        w - margin,
        h - margin
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        margin,
        margin,
        margin,
        h - margin
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\">log10 noise level</text>\n",
        w / 2.0 - 50.0,
        h - 18.0
    ));
    for (k, (metric, pts)) in report.medians.iter().enumerate() {
        let color = PLOT_COLORS[k % PLOT_COLORS.len()];
        for &(d, v) in pts {
            if !(d > 0.0 && v > 0.0 && v.is_finite()) {
                continue;
            }
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"{color}\"/>\n",
                px(d.log10()),
                py(v.log10())
            ));
        }
        if let Some(fit) = report.fitted.get(metric) {
            // log10 y = slope*log10 x + intercept/ln(10)
            let ly = |lx: f64| fit.slope * lx + fit.intercept / std::f64::consts::LN_10;
            svg.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-dasharray=\"4 3\"/>\n",
                px(x0),
                py(ly(x0)),
                px(x1),
                py(ly(x1))
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"{color}\">{metric} (slope {:.3})</text>\n",
                w - margin - 180.0,
                margin + 16.0 * (k as f64 + 1.0),
                fit.slope
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{delta_sweep, make_diagonal_testbed, Scheme, SweepOptions};
    use crate::solve::RegConfig;

    fn small_report() -> SweepReport {
        let tb = make_diagonal_testbed(32, 1.0, 2.0).unwrap();
        let ctx = tb.context(RegConfig::default()).unwrap();
        let opts = SweepOptions::new(vec![1e-1, 1e-2, 1e-3], vec![1, 2]);
        delta_sweep(&ctx, Scheme::Variational, &tb.y_exact, &tb.truth, &opts).unwrap()
    }

    fn meta() -> SweepMeta {
        SweepMeta {
            version: "test".into(),
            config_hash: "0".into(),
            scheme: "variational".into(),
            problem: "diagonal".into(),
            deltas: vec![1e-1, 1e-2, 1e-3],
            seeds: vec![1, 2],
            config: RegConfig::default(),
            diagnostics: Default::default(),
        }
    }

    #[test]
    fn emission_is_byte_stable() {
        let report = small_report();
        let dir1 = std::env::temp_dir().join("rangereg_report_a");
        let dir2 = std::env::temp_dir().join("rangereg_report_b");
        emit_report(&report, &meta(), &dir1).unwrap();
        emit_report(&report, &meta(), &dir2).unwrap();
        for f in ["sweep.csv", "rates.svg", "meta.json"] {
            let a = std::fs::read(dir1.join(f)).unwrap();
            let b = std::fs::read(dir2.join(f)).unwrap();
            assert_eq!(a, b, "{f} differs between runs");
        }
    }

    #[test]
    fn csv_has_the_contracted_header() {
        let report = small_report();
        let dir = std::env::temp_dir().join("rangereg_report_hdr");
        emit_report(&report, &meta(), &dir).unwrap();
        let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "delta,seed,scheme,err_breg,err_norm,residual_K,norm_Px,Q_gap,alpha,n_stop,status"
        );
        assert_eq!(csv.lines().count(), 1 + report.rows.len());
    }

    #[test]
    fn svg_is_well_formed_without_nan() {
        let report = small_report();
        let svg = render_svg(&report);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<svg").count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("NaN"));
    }
}
