//! Minimal SVG charts. Values are expected in [0, 1].

use std::fmt::Write;

const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];
const FONT: &str = "font-family=\"sans-serif\" font-size=\"12\"";

pub struct Series {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

/// Panel name, x labels, y values.
pub type Panel = (String, Vec<String>, Vec<Option<f64>>);

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" {FONT} font-size=\"14\">{}</text>", w / 2.0, escape(title));
}

/// Y axis from 0 to 1 with gridlines at every 0.2.
fn y_axis(out: &mut String, x0: f64, x1: f64, top: f64, bottom: f64) {
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let y = bottom - v * (bottom - top);
        let _ = writeln!(out, "<line x1=\"{x0}\" y1=\"{y:.1}\" x2=\"{x1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>");
        let _ = writeln!(out, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" {FONT}>{v:.1}</text>", x0 - 4.0, y + 4.0);
    }
    let _ = writeln!(out, "<line x1=\"{x0}\" y1=\"{top}\" x2=\"{x0}\" y2=\"{bottom}\" stroke=\"black\"/>");
    let _ = writeln!(out, "<line x1=\"{x0}\" y1=\"{bottom}\" x2=\"{x1}\" y2=\"{bottom}\" stroke=\"black\"/>");
}

fn legend(out: &mut String, names: &[&str], x: f64, y: f64) {
    for (i, name) in names.iter().enumerate() {
        let yy = y + 16.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{x}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{}\" y=\"{:.1}\" {FONT}>{}</text>",
            yy - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            yy,
            escape(name)
        );
    }
}

/// One group of bars per category, one bar per series.
pub fn grouped_bars(title: &str, categories: &[String], series: &[Series]) -> String {
    let (left, right, top, bottom) = (50.0, 130.0, 35.0, 40.0);
    let group_w = 30.0 * series.len().max(1) as f64 + 30.0;
    let width = left + group_w * categories.len().max(1) as f64 + right;
    let height = 300.0;
    let y_bottom = height - bottom;
    let mut out = String::new();
    header(&mut out, width, height, title);
    y_axis(&mut out, left, width - right, top, y_bottom);
    for (ci, cat) in categories.iter().enumerate() {
        let gx = left + group_w * ci as f64 + 15.0;
        for (si, s) in series.iter().enumerate() {
            if let Some(Some(v)) = s.values.get(ci) {
                let v = v.clamp(0.0, 1.0);
                let h = v * (y_bottom - top);
                let _ = writeln!(
                    out,
                    "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"26\" height=\"{h:.1}\" fill=\"{}\"><title>{} {}: {v:.3}</title></rect>",
                    gx + 30.0 * si as f64,
                    y_bottom - h,
                    PALETTE[si % PALETTE.len()],
                    escape(cat),
                    escape(&s.name)
                );
            }
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{}</text>",
            gx + 15.0 * series.len() as f64,
            y_bottom + 18.0,
            escape(cat)
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    legend(&mut out, &names, width - right + 15.0, top + 10.0);
    out.push_str("</svg>\n");
    out
}

/// One small line chart per panel, side by side; each panel has its own x labels.
pub fn line_panels(title: &str, panels: &[Panel]) -> String {
    let (panel_w, gap, left, top, bottom) = (220.0, 30.0, 50.0, 45.0, 45.0);
    let width = left + (panel_w + gap) * panels.len().max(1) as f64;
    let height = 300.0;
    let y_bottom = height - bottom;
    let mut out = String::new();
    header(&mut out, width, height, title);
    for (pi, (name, labels, values)) in panels.iter().enumerate() {
        let x0 = left + (panel_w + gap) * pi as f64;
        let x1 = x0 + panel_w;
        y_axis(&mut out, x0, x1, top, y_bottom);
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{}</text>", (x0 + x1) / 2.0, top - 8.0, escape(name));
        let n = labels.len().max(1);
        let step = panel_w / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| x0 + step * (i as f64 + 0.5)).collect();
        for (x, l) in xs.iter().zip(labels) {
            let _ = writeln!(out, "<text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\" {FONT} font-size=\"9\">{}</text>", y_bottom + 14.0, escape(l));
        }
        let color = PALETTE[pi % PALETTE.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(values)
            .filter_map(|(x, v)| v.map(|v| format!("{x:.1},{:.1}", y_bottom - v.clamp(0.0, 1.0) * (y_bottom - top))))
            .collect();
        if points.len() > 1 {
            let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>", points.join(" "));
        }
        for p in &points {
            let (x, y) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(out, "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"{color}\"/>");
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bars_skip_missing_values() {
        let svg = grouped_bars(
            "t",
            &["a".into(), "b".into()],
            &[Series {
                name: "s".into(),
                values: vec![Some(0.5), None],
            }],
        );
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<title>").count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn labels_are_escaped() {
        let svg = line_panels("x < y", &[("p&q".into(), vec!["[0,1)".into()], vec![Some(1.0)])]);
        assert!(svg.contains("x &lt; y") && svg.contains("p&amp;q"));
    }
}
