//! Static SVG plots: grouped metric bars with standard-error whiskers and
//! simple runtime bars. Output is plain SVG text with fixed-precision
//! coordinates, so identical inputs render byte-identical files.

use crate::eval::EvalReport;
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 56.0;
const BASELINE_FILL: &str = "#5b7fa6";
const ENHANCED_FILL: &str = "#d9823b";

struct Svg(String);

impl Svg {
    fn new(title: &str) -> Svg {
        let mut s = String::with_capacity(4096);
        s.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
             font-family=\"sans-serif\" font-size=\"12\">\n\
             <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
             <text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
            WIDTH / 2.0,
            escape(title)
        ));
        Svg(s)
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        self.0.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\"/>\n"
        ));
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64) {
        self.0.push_str(&format!(
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" \
             stroke=\"#333\" stroke-width=\"1\"/>\n"
        ));
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        self.0.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\">{}</text>\n",
            escape(s)
        ));
    }

    fn finish(mut self) -> String {
        self.0.push_str("</svg>\n");
        self.0
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Y-axis with five ticks from 0 to `max`; returns pixels-per-unit.
fn y_axis(svg: &mut Svg, max: f64) -> f64 {
    let span = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let scale = span / max;
    svg.line(MARGIN_LEFT, MARGIN_TOP, MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM);
    svg.line(MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM, WIDTH - MARGIN_RIGHT, HEIGHT - MARGIN_BOTTOM);
    for i in 0..=5 {
        let v = max * f64::from(i) / 5.0;
        let y = HEIGHT - MARGIN_BOTTOM - v * scale;
        svg.line(MARGIN_LEFT - 4.0, y, MARGIN_LEFT, y);
        svg.text(MARGIN_LEFT - 8.0, y + 4.0, "end", &format!("{v:.3}"));
    }
    scale
}

/// Grouped bar chart of an evaluation report: per metric, a baseline and an
/// enhanced bar with ±SE whiskers, annotated with the significance label.
pub fn metric_bars(title: &str, r: &EvalReport) -> Result<String> {
    if r.metrics.is_empty() {
        return Err(Error::Config("metric plot needs at least one metric".into()));
    }
    let mut svg = Svg::new(title);
    let max = r
        .metrics
        .iter()
        .flat_map(|m| {
            [m.baseline_mean + m.baseline_se, m.enhanced_mean + m.enhanced_se]
        })
        .fold(0.0_f64, f64::max)
        .max(1e-12)
        * 1.12;
    let scale = y_axis(&mut svg, max);
    let floor = HEIGHT - MARGIN_BOTTOM;
    let group_w = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / r.metrics.len() as f64;
    let bar_w = (group_w * 0.3).min(48.0);
    for (i, m) in r.metrics.iter().enumerate() {
        let cx = MARGIN_LEFT + group_w * (i as f64 + 0.5);
        for (j, (mean, se, fill)) in [
            (m.baseline_mean, m.baseline_se, BASELINE_FILL),
            (m.enhanced_mean, m.enhanced_se, ENHANCED_FILL),
        ]
        .into_iter()
        .enumerate()
        {
            let x = cx + (j as f64 - 1.0) * bar_w + bar_w * 0.1;
            let h = mean * scale;
            svg.rect(x, floor - h, bar_w * 0.8, h, fill);
            let wx = x + bar_w * 0.4;
            svg.line(wx, floor - (mean - se) * scale, wx, floor - (mean + se) * scale);
        }
        svg.text(cx, floor + 18.0, "middle", &m.metric);
        svg.text(cx, floor + 34.0, "middle", &m.significance);
    }
    svg.rect(MARGIN_LEFT + 8.0, MARGIN_TOP - 14.0, 12.0, 12.0, BASELINE_FILL);
    svg.text(MARGIN_LEFT + 26.0, MARGIN_TOP - 4.0, "start", "baseline");
    svg.rect(MARGIN_LEFT + 108.0, MARGIN_TOP - 14.0, 12.0, 12.0, ENHANCED_FILL);
    svg.text(MARGIN_LEFT + 126.0, MARGIN_TOP - 4.0, "start", "enhanced");
    Ok(svg.finish())
}

/// Simple labelled bar chart for runtimes (seconds per bar).
pub fn runtime_bars(title: &str, labels: &[String], seconds: &[f64]) -> Result<String> {
    if labels.is_empty() || labels.len() != seconds.len() {
        return Err(Error::Config("runtime plot needs matching labels and values".into()));
    }
    if seconds.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::Config("runtime plot values must be finite and non-negative".into()));
    }
    let mut svg = Svg::new(title);
    let max = seconds.iter().fold(0.0_f64, |a, &b| a.max(b)).max(1e-12) * 1.12;
    let scale = y_axis(&mut svg, max);
    let floor = HEIGHT - MARGIN_BOTTOM;
    let group_w = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / labels.len() as f64;
    let bar_w = (group_w * 0.55).min(56.0);
    for (i, (label, &secs)) in labels.iter().zip(seconds).enumerate() {
        let cx = MARGIN_LEFT + group_w * (i as f64 + 0.5);
        let h = secs * scale;
        svg.rect(cx - bar_w / 2.0, floor - h, bar_w, h, BASELINE_FILL);
        svg.text(cx, floor - h - 6.0, "middle", &format!("{secs:.3}s"));
        svg.text(cx, floor + 18.0, "middle", label);
    }
    Ok(svg.finish())
}
