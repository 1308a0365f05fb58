//! Phase portraits as standalone SVG documents.

use std::fmt::Write;

use super::trace::FlowTrace;
use crate::error::{Error, Result};

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone)]
pub struct PlotStyle {
    pub x_column: String,
    pub y_column: String,
    pub x_label: String,
    pub y_label: String,
    pub title: String,
    pub width: f64,
    pub height: f64,
}

impl Default for PlotStyle {
    /// Fiber size against base scale: x = e^{-2f}, y = u.
    fn default() -> Self {
        Self {
            x_column: "fiber".into(),
            y_column: "u".into(),
            x_label: "e^(-2f)".into(),
            y_label: "u".into(),
            title: "Ricci flow on Berger spheres".into(),
            width: 640.0,
            height: 480.0,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Evenly spaced round tick values covering [lo, hi].
fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn legend_text(t: &FlowTrace, i: usize) -> String {
    t.meta("legend").or_else(|| t.meta("label")).map(str::to_string).unwrap_or_else(|| format!("trace {}", i + 1))
}

/// One polyline per trace, axes through the data range (origin included),
/// tick labels and a legend read from each trace's metadata.
pub fn render_phase_portrait(traces: &[FlowTrace], style: &PlotStyle) -> Result<String> {
    if traces.is_empty() {
        return Err(Error::EmptyInput("no traces to plot".into()));
    }
    let mut series = Vec::with_capacity(traces.len());
    for (i, t) in traces.iter().enumerate() {
        let (Some(xs), Some(ys)) = (t.column(&style.x_column), t.column(&style.y_column)) else {
            return Err(Error::EmptyInput(format!(
                "trace {} lacks columns {} and {}",
                i + 1,
                style.x_column,
                style.y_column
            )));
        };
        let pts: Vec<(f64, f64)> =
            xs.iter().zip(ys).map(|(x, y)| (*x, *y)).filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
        if pts.is_empty() {
            return Err(Error::EmptyInput(format!("trace {} has no finite points", i + 1)));
        }
        series.push(pts);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (x, y) in series.iter().flatten() {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let (w, h) = (style.width, style.height);
    let (left, right, top, bottom) = (64.0, 24.0, 40.0, 52.0);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(&style.title));

    let _ = writeln!(s, r#"<g id="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#, px(x0), py(y0), px(x1), py(y0));
    let _ = writeln!(s, r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#, px(x0), py(y0), px(x0), py(y1));
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="ticks" stroke="black">"#);
    let (xt, xd) = ticks(x0, x1);
    for v in &xt {
        let _ = writeln!(s, r#"<line x1="{0:.3}" y1="{1:.3}" x2="{0:.3}" y2="{2:.3}"/>"#, px(*v), py(y0), py(y0) + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" stroke="none">{:.*}</text>"#,
            px(*v),
            py(y0) + 18.0,
            xd,
            v
        );
    }
    let (yt, yd) = ticks(y0, y1);
    for v in &yt {
        let _ = writeln!(s, r#"<line x1="{0:.3}" y1="{1:.3}" x2="{2:.3}" y2="{1:.3}"/>"#, px(x0) - 5.0, py(*v), px(x0));
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end" stroke="none">{:.*}</text>"#,
            px(x0) - 8.0,
            py(*v) + 4.0,
            yd,
            v
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (left + w - right) / 2.0,
        h - 12.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0,
        escape(&style.y_label)
    );

    let _ = writeln!(s, r#"<g id="traces" fill="none" stroke-width="1.5">"#);
    for (i, pts) in series.iter().enumerate() {
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{:.3},{:.3}", px(*x), py(*y))).collect();
        let _ = writeln!(s, r#"<polyline stroke="{}" points="{}"/>"#, PALETTE[i % PALETTE.len()], coords.join(" "));
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="legend">"#);
    for (i, t) in traces.iter().enumerate() {
        let ly = top + 8.0 + 18.0 * i as f64;
        let lx = w - right - 150.0;
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{c}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&legend_text(t, i)));
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

/// Parses the document and counts its polylines.
pub fn check_well_formed(svg: &str) -> Result<usize> {
    let doc = roxmltree::Document::parse(svg).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
    if doc.root_element().tag_name().name() != "svg" {
        return Err(Error::domain("root element is not <svg>"));
    }
    Ok(doc.descendants().filter(|n| n.has_tag_name("polyline")).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(label: &str) -> FlowTrace {
        let mut t = FlowTrace::new(&["t", "fiber", "u"]).with_meta("legend", label);
        t.push(&[0.0, 1.0, 2.0]).unwrap();
        t.push(&[1.0, 0.0, 0.0]).unwrap();
        t
    }

    #[test]
    fn single_segment_is_well_formed() {
        let svg = render_phase_portrait(&[two_point("a<b")], &PlotStyle::default()).unwrap();
        assert_eq!(check_well_formed(&svg).unwrap(), 1);
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn output_is_deterministic() {
        let traces = [two_point("x"), two_point("y")];
        let a = render_phase_portrait(&traces, &PlotStyle::default()).unwrap();
        let b = render_phase_portrait(&traces, &PlotStyle::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(check_well_formed(&a).unwrap(), 2);
    }

    #[test]
    fn missing_input_is_rejected() {
        assert!(matches!(render_phase_portrait(&[], &PlotStyle::default()), Err(Error::EmptyInput(_))));
        let t = FlowTrace::new(&["t"]);
        assert!(matches!(render_phase_portrait(&[t], &PlotStyle::default()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn tick_values() {
        let (t, d) = ticks(0.0, 2.0);
        assert_eq!(t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(d, 1);
        let (t, d) = ticks(0.0, 40.0);
        assert_eq!(t.len(), 5);
        assert_eq!(d, 0);
    }
}
