//! Self-contained SVG rendering of BER curves.

use std::fmt::Write as _;
use std::path::Path;

use super::EvalRecord;
use crate::{Error, Result};

/// Zero-error points are drawn at this BER.
pub const PLOT_FLOOR: f64 = 1e-8;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Render one polyline per `(name, records)` with a log-scale BER axis.
pub fn render_svg(series: &[(String, Vec<EvalRecord>)]) -> Result<String> {
    if series.is_empty() || series.iter().any(|(_, r)| r.is_empty()) {
        return Err(Error::Config("nothing to plot".into()));
    }
    let all = || series.iter().flat_map(|(_, r)| r.iter());
    let (mut x0, mut x1) = all().fold((f64::MAX, f64::MIN), |(lo, hi), r| (lo.min(r.snr_db), hi.max(r.snr_db)));
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let ber = |r: &EvalRecord| r.ber.max(PLOT_FLOOR);
    let y_lo = all().map(ber).fold(1.0f64, f64::min).log10().floor();
    let y_hi = all().map(ber).fold(PLOT_FLOOR, f64::max).log10().ceil().max(y_lo + 1.0);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let py = |b: f64| MARGIN_T + (y_hi - b.log10()) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for e in (y_lo as i32)..=(y_hi as i32) {
        let y = py(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            MARGIN_L + plot_w,
            MARGIN_L - 6.0,
            y + 4.0
        );
    }
    let xs: Vec<f64> = {
        let mut v: Vec<f64> = all().map(|r| r.snr_db).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    for x in &xs {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{MARGIN_T}" x2="{0:.2}" y2="{1:.2}" stroke="#eee"/><text x="{0:.2}" y="{2:.2}" text-anchor="middle">{x}</text>"##,
            px(*x),
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Eb/N0 (dB)</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">BER</text>"#,
        MARGIN_T + plot_h / 2.0
    );
    for (i, (name, recs)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = recs.iter().map(|r| format!("{:.2},{:.2}", px(r.snr_db), py(ber(r)))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        for r in recs {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(r.snr_db),
                py(ber(r))
            );
        }
        let mut label = escape(name);
        if recs.iter().any(|r| r.ber < PLOT_FLOOR) {
            label.push_str(" (0 errors at floor)");
        }
        let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
        let lx = MARGIN_L + plot_w + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(series: &[(String, Vec<EvalRecord>)], path: &Path) -> Result<()> {
    let svg = render_svg(series)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(snr_db: f64, ber: f64) -> EvalRecord {
        EvalRecord { snr_db, frames: 10, bit_errors: 0, info_bits: 10, frame_errors: 0, ber, fer: 0.0 }
    }

    #[test]
    fn renders_lines_and_floor_note() {
        let svg = render_svg(&[
            ("bp".to_string(), vec![rec(1.0, 0.1), rec(2.0, 0.01)]),
            ("a<b".to_string(), vec![rec(1.0, 0.05), rec(2.0, 0.0)]),
        ])
        .unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b (0 errors at floor)"));
        assert!(svg.contains(">1e-8<"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(render_svg(&[]).is_err());
        assert!(render_svg(&[("x".into(), vec![])]).is_err());
    }
}
