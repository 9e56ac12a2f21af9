/// Plain SVG line charts, enough to eyeball training curves without
/// pulling in a plotting stack.

#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotSeries {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 6] = [
    "#3465a4", "#cc0000", "#4e9a06", "#f57900", "#75507b", "#555753",
];

struct Axis {
    min: f64,
    max: f64,
    log: bool,
}

impl Axis {
    fn build(values: impl Iterator<Item = f64>, want_log: bool) -> Axis {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut all_positive = true;
        for v in values {
            if !v.is_finite() {
                continue;
            }
            min = min.min(v);
            max = max.max(v);
            if v <= 0.0 {
                all_positive = false;
            }
        }
        if !min.is_finite() || !max.is_finite() {
            min = 0.0;
            max = 1.0;
        }
        if min == max {
            min -= 0.5;
            max += 0.5;
        }
        let log = want_log && all_positive && min > 0.0;
        Axis { min, max, log }
    }

    fn fraction(&self, v: f64) -> f64 {
        let (v, lo, hi) = if self.log {
            (v.ln(), self.min.ln(), self.max.ln())
        } else {
            (v, self.min, self.max)
        };
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs();
    if magnitude >= 0.01 && magnitude < 100_000.0 {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders one chart. Log axes fall back to linear when a value is
/// non-positive.
pub fn line_plot_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[PlotSeries],
    log_x: bool,
    log_y: bool,
) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let x_axis = Axis::build(xs, log_x);
    let y_axis = Axis::build(ys, log_y);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_px = |x: f64, y: f64| {
        (
            MARGIN_LEFT + x_axis.fraction(x) * plot_w,
            MARGIN_TOP + (1.0 - y_axis.fraction(y)) * plot_h,
        )
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    ));

    let (x0, y0) = (MARGIN_LEFT, MARGIN_TOP + plot_h);
    let (x1, y1) = (MARGIN_LEFT + plot_w, MARGIN_TOP);
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));

    let x_suffix = if x_axis.log { " (log)" } else { "" };
    let y_suffix = if y_axis.log { " (log)" } else { "" };
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(&format!("{x_label}{x_suffix}"))
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(&format!("{y_label}{y_suffix}"))
    ));

    svg.push_str(&format!(
        "<text x=\"{x0}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        y0 + 16.0,
        format_tick(x_axis.min)
    ));
    svg.push_str(&format!(
        "<text x=\"{x1}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        y0 + 16.0,
        format_tick(x_axis.max)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
        x0 - 6.0,
        y0 + 4.0,
        format_tick(y_axis.min)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
        x0 - 6.0,
        y1 + 4.0,
        format_tick(y_axis.max)
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !s.points.is_empty() {
            let path: Vec<String> = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| {
                    let (px, py) = to_px(x, y);
                    format!("{px:.1},{py:.1}")
                })
                .collect();
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                path.join(" ")
            ));
        }
        let ly = MARGIN_TOP + 14.0 + 18.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w + 12.0;
        svg.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            ly - 4.0,
            lx + 18.0,
            ly - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{ly}\">{}</text>\n",
            lx + 24.0,
            escape(&s.label)
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_series_and_escapes_labels() {
        let series = vec![
            PlotSeries::new("td<1>", vec![(0.0, 1.0), (10.0, 0.1)]),
            PlotSeries::new("mc", vec![(0.0, 2.0), (10.0, 1.0)]),
        ];
        let svg = line_plot_svg("errors", "step", "error", &series, false, true);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("td&lt;1&gt;"));
        assert!(svg.contains("error (log)"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn log_axis_falls_back_on_nonpositive_values() {
        let series = vec![PlotSeries::new("s", vec![(1.0, 0.0), (2.0, 1.0)])];
        let svg = line_plot_svg("t", "x", "y", &series, false, true);
        assert!(!svg.contains("y (log)"));
    }

    #[test]
    fn empty_series_still_renders_a_frame() {
        let svg = line_plot_svg("t", "x", "y", &[], false, false);
        assert!(svg.contains("</svg>"));
    }
}
