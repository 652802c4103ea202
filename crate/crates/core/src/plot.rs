//! Standalone SVG line charts from tidy CSV files.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Mean of `y` per (`group`, `x`), groups in lexicographic order and `x`
/// ascending.
pub fn group_means(csv_text: &str, x: &str, y: &str, group: &str) -> Result<BTreeMap<String, Vec<(f64, f64)>>> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Plot(format!("column `{name}` not found; available: {}", headers.iter().collect::<Vec<_>>().join(", "))))
    };
    let (xi, yi, gi) = (col(x)?, col(y)?, col(group)?);
    let mut sums: BTreeMap<String, BTreeMap<u64, (f64, f64, usize)>> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let num = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Plot(format!("row {}: `{name}` value `{raw}` is not a finite number", line + 2)))
        };
        let (xv, yv) = (num(xi, x)?, num(yi, y)?);
        let g = record.get(gi).unwrap_or("").to_string();
        let entry = sums.entry(g).or_default().entry(order_key(xv)).or_insert((xv, 0.0, 0));
        entry.1 += yv;
        entry.2 += 1;
    }
    if sums.is_empty() {
        return Err(Error::Plot("csv has no data rows".into()));
    }
    Ok(sums
        .into_iter()
        .map(|(g, pts)| (g, pts.into_values().map(|(xv, s, n)| (xv, s / n as f64)).collect()))
        .collect())
}

/// Maps a finite f64 to a u64 with the same ordering.
fn order_key(v: f64) -> u64 {
    let v = if v == 0.0 { 0.0 } else { v };
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | 1 << 63
    }
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-12 {
        let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 1.0 };
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders one polyline per group with axes, ticks and a legend.
pub fn render_svg(csv_text: &str, x: &str, y: &str, group: &str) -> Result<String> {
    let series = group_means(csv_text, x, y, group)?;
    let all = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(xv, yv) in all {
        x0 = x0.min(xv);
        x1 = x1.max(xv);
        y0 = y0.min(yv);
        y1 = y1.max(yv);
    }
    let (x0, x1) = nice_range(x0, x1);
    let (y0, y1) = nice_range(y0, y1);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + ph - (v - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (bx, by) = (TOP + ph, LEFT + pw);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{bx}" x2="{by}" y2="{bx}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{bx}" stroke="black"/>"#);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{bx}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, bx + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.3}</text>"#, bx + 18.0);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#, LEFT - 8.0, py + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0, escape(x));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y)
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(xv, yv)| format!("{:.2},{:.2}", sx(xv), sy(yv))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, WIDTH - RIGHT + 60.0, TOP, escape(group));
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "variant,depth,test_acc\na,2,0.5\na,2,0.7\na,8,0.4\nb,2,0.9\nb,8,0.8\nb,32,0.85\n";

    #[test]
    fn means_per_group_and_x() {
        let m = group_means(CSV, "depth", "test_acc", "variant").unwrap();
        assert_eq!(m["a"], vec![(2.0, 0.6), (8.0, 0.4)]);
        assert_eq!(m["b"].len(), 3);
    }

    #[test]
    fn one_polyline_per_group() {
        let svg = render_svg(CSV, "depth", "test_acc", "variant").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">depth<") && svg.contains(">test_acc<"));
        assert_eq!(svg, render_svg(CSV, "depth", "test_acc", "variant").unwrap());
    }

    #[test]
    fn missing_column_and_empty_body() {
        let err = render_svg(CSV, "layers", "test_acc", "variant").unwrap_err().to_string();
        assert!(err.contains("layers"), "{err}");
        assert!(render_svg("variant,depth,test_acc\n", "depth", "test_acc", "variant").is_err());
    }

    #[test]
    fn order_key_is_monotone() {
        let vals = [-3.5, -1.0, 0.0, 1e-300, 2.0, 64.0];
        for w in vals.windows(2) {
            assert!(order_key(w[0]) < order_key(w[1]));
        }
        assert_eq!(order_key(-0.0), order_key(0.0));
    }
}
