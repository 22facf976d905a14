use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

#[derive(Debug, Default)]
struct Series {
    points: Vec<(f64, f64)>,
}

struct References {
    v0: f64,
    v_bar: Option<f64>,
    threshold: Option<f64>,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedCsv(msg.into())
}

fn parse_curves(text: &str) -> Result<(BTreeMap<String, Series>, References)> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| malformed(format!("missing column {name:?}")));
    let (li, vi, v0i, vbi) = (need("lambda")?, need("value")?, need("v0")?, need("v_bar")?);
    let (sbi, chi, tri) = (col("sigma_bar"), col("channel"), col("trial"));

    let number = |field: &str, name: &str| -> Result<Option<f64>> {
        if field.is_empty() {
            return Ok(None);
        }
        field
            .parse::<f64>()
            .map(Some)
            .map_err(|_| malformed(format!("column {name:?} holds {field:?}")))
    };
    let mut series: BTreeMap<String, Series> = BTreeMap::new();
    let mut refs = None;
    for record in reader.records() {
        let r = record.map_err(|e| malformed(e.to_string()))?;
        let lambda = number(&r[li], "lambda")?.ok_or_else(|| malformed("empty lambda"))?;
        let value = number(&r[vi], "value")?.ok_or_else(|| malformed("empty value"))?;
        if refs.is_none() {
            let v0 = number(&r[v0i], "v0")?.ok_or_else(|| malformed("empty v0"))?;
            let v_bar = number(&r[vbi], "v_bar")?;
            let sigma = match sbi {
                Some(i) => number(&r[i], "sigma_bar")?,
                None => None,
            };
            refs = Some(References {
                v0,
                v_bar,
                threshold: v_bar.zip(sigma).map(|(v, s)| v + s / 2.0),
            });
        }
        let mut label = chi.map_or_else(|| "curve".to_string(), |i| r[i].to_string());
        if let Some(i) = tri {
            label = format!("{label} #{}", &r[i]);
        }
        if lambda > 0.0 {
            series.entry(label).or_default().points.push((lambda.log10(), value));
        }
    }
    let refs = refs.ok_or_else(|| malformed("no data rows"))?;
    if series.values().all(|s| s.points.is_empty()) {
        return Err(malformed("no positive pressures to place on a log axis"));
    }
    Ok((series, refs))
}

/// Renders a curve CSV (`lambda`, `value`, `v0`, `v_bar`, optional
/// `sigma_bar` and `channel`) as a standalone SVG line plot.
pub fn render_plot(text: &str) -> Result<String> {
    let (series, refs) = parse_curves(text)?;
    let xs = series.values().flat_map(|s| s.points.iter().map(|p| p.0));
    let (mut x_lo, mut x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    x_lo = x_lo.floor();
    x_hi = x_hi.ceil().max(x_lo + 1.0);
    let ys = series
        .values()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .chain([Some(refs.v0), refs.v_bar, refs.threshold].into_iter().flatten());
    let (y_lo, y_hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let pad = ((y_hi - y_lo) * 0.08).max(0.05);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * pw;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for d in (x_lo as i64)..=(x_hi as i64) {
        let x = sx(d as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 16.0
        );
    }
    for i in 0..=5 {
        let v = y_lo + (y_hi - y_lo) * i as f64 / 5.0;
        let y = sy(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">λ (log scale)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">value</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let mut legend = Vec::new();
    let refs_lines = [
        ("V₀", Some(refs.v0), "#000"),
        ("V̄", refs.v_bar, "#777"),
        ("V̄+σ̄/2", refs.threshold, "#bbb"),
    ];
    for (name, value, color) in refs_lines {
        if let Some(v) = value {
            let y = sy(v);
            let _ = writeln!(
                svg,
                r#"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#,
                LEFT + pw
            );
            legend.push((name.to_string(), color, true));
        }
    }
    for (i, (name, s)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        legend.push((name.clone(), color, false));
    }
    for (i, (name, color, dashed)) in legend.iter().enumerate() {
        let y = TOP + 12.0 + 18.0 * i as f64;
        let x = LEFT + pw + 12.0;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 24.0,
            x + 30.0,
            y + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads `curve` and writes the plot to `out`.
pub fn emit_plot(curve: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(curve).map_err(|e| Error::io(curve, e))?;
    let svg = render_plot(&text)?;
    fs::write(out, svg).map_err(|e| Error::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_POINTS: &str = "lambda,value,v0,v_bar,sigma_bar\n0.1,0.2,0.3,0.1,0.2\n10,0.4,0.3,0.1,0.2\n";

    #[test]
    fn two_point_curve_renders() {
        let svg = render_plot(TWO_POINTS).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("stroke-dasharray").count(), 6);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(render_plot(""), Err(Error::MalformedCsv(_))));
        assert!(matches!(
            render_plot("lambda,value,v0,v_bar\n"),
            Err(Error::MalformedCsv(_))
        ));
        assert!(matches!(
            render_plot("lambda,value\n1,2\n"),
            Err(Error::MalformedCsv(_))
        ));
        assert!(matches!(
            render_plot("lambda,value,v0,v_bar\nx,1,1,1\n"),
            Err(Error::MalformedCsv(_))
        ));
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("c.csv");
        let svg = dir.path().join("c.svg");
        fs::write(&csv, TWO_POINTS).unwrap();
        emit_plot(&csv, &svg).unwrap();
        assert_eq!(fs::read_to_string(&svg).unwrap(), render_plot(TWO_POINTS).unwrap());
    }
}
