//! Minimal native SVG scatter plots, enough to render a velocity-vs-jerk
//! tradeoff chart without a plotting dependency.

use std::fmt::Write;

pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn nice_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = (hi - lo) * 0.1;
    (lo - pad, hi + pad)
}

/// Render a labelled scatter plot.
pub fn scatter_svg(title: &str, x_label: &str, y_label: &str, points: &[ScatterPoint]) -> String {
    let (x_lo, x_hi) = nice_range(points.iter().map(|p| p.x));
    let (y_lo, y_hi) = nice_range(points.iter().map(|p| p.y));
    let px = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
        W / 2.0,
        title
    );
    // Axes.
    let _ = writeln!(
        s,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let _ = writeln!(
        s,
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
        W / 2.0,
        H - 16.0,
        x_label
    );
    let _ = writeln!(
        s,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{}</text>",
        H / 2.0,
        H / 2.0,
        y_label
    );
    // Axis extents.
    for (v, x, y, anchor) in [
        (x_lo, px(x_lo), H - MARGIN + 20.0, "middle"),
        (x_hi, px(x_hi), H - MARGIN + 20.0, "middle"),
    ] {
        let _ = writeln!(
            s,
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{v:.2}</text>"
        );
    }
    for (v, y) in [(y_lo, py(y_lo)), (y_hi, py(y_hi))] {
        let _ = writeln!(
            s,
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{v:.2}</text>",
            x = MARGIN - 6.0
        );
    }
    // Points.
    for p in points {
        let _ = writeln!(
            s,
            "<circle cx=\"{x}\" cy=\"{y}\" r=\"5\" fill=\"steelblue\"/>",
            x = px(p.x),
            y = py(p.y)
        );
        let _ = writeln!(
            s,
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>",
            x = px(p.x) + 8.0,
            y = py(p.y) - 6.0,
            label = p.label
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_points_and_labels() {
        let svg = scatter_svg(
            "tradeoff",
            "max |jerk| (m/s^3)",
            "avg velocity (m/s)",
            &[
                ScatterPoint { x: 1.0, y: 29.2, label: "a".into() },
                ScatterPoint { x: 6.0, y: 14.0, label: "b".into() },
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("circle"));
        assert!(svg.contains(">a</text>"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn degenerate_ranges_do_not_divide_by_zero() {
        let svg = scatter_svg(
            "t",
            "x",
            "y",
            &[ScatterPoint { x: 2.0, y: 3.0, label: "only".into() }],
        );
        assert!(!svg.contains("NaN"));
    }
}
