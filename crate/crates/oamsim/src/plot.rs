//! Minimal native SVG plotting: XY charts with lines, markers, error bars,
//! legends and nice 1-2-5 ticks, plus a magnitude-matrix view for
//! coefficient tables. Every plotted value comes straight from the data the
//! caller also writes to CSV; the SVG is a pure view with no external
//! assets.

use std::fmt::Write as _;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 64.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    Line,
    Markers,
    LineAndMarkers,
}

/// One labeled curve or point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    y_errors: Option<Vec<f64>>,
    style: SeriesStyle,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, y_errors: None, style: SeriesStyle::Line }
    }

    pub fn markers(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, y_errors: None, style: SeriesStyle::Markers }
    }

    pub fn line_and_markers(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, y_errors: None, style: SeriesStyle::LineAndMarkers }
    }

    /// Attaches symmetric 1σ error bars; lengths must match the points.
    pub fn with_y_errors(mut self, errors: Vec<f64>) -> Self {
        assert_eq!(errors.len(), self.points.len(), "one error per point");
        self.y_errors = Some(errors);
        self
    }
}

/// An XY chart assembled from [`Series`] values.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<Series>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Largest {1, 2, 5}·10^k step that yields at least `target` intervals.
fn nice_step(range: f64, target: usize) -> f64 {
    let raw = range / target as f64;
    let magnitude = 10f64.powf(raw.abs().log10().floor());
    for factor in [1.0, 2.0, 5.0] {
        if factor * magnitude >= raw {
            return factor * magnitude;
        }
    }
    10.0 * magnitude
}

fn ticks(min: f64, max: f64) -> (Vec<f64>, f64) {
    let step = nice_step(max - min, 5);
    let first = (min / step).ceil() * step;
    let mut out = Vec::new();
    let mut t = first;
    while t <= max + 1e-9 * step {
        // Snap values like 0.30000000000000004 back onto the grid.
        out.push((t / step).round() * step);
        t += step;
    }
    (out, step)
}

fn fmt_tick(value: f64, step: f64) -> String {
    if value == 0.0 {
        // Covers -0.0 too; the origin label needs no decimals.
        return "0".to_string();
    }
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    format!("{value:.decimals$}")
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new() }
    }

    pub fn push(&mut self, series: Series) {
        self.series.push(series);
    }

    fn data_range(&self) -> ((f64, f64), (f64, f64)) {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for (i, &(px, py)) in s.points.iter().enumerate() {
                let err = s.y_errors.as_ref().map_or(0.0, |e| e[i]);
                x = (x.0.min(px), x.1.max(px));
                y = (y.0.min(py - err), y.1.max(py + err));
            }
        }
        if !x.0.is_finite() || !x.1.is_finite() {
            x = (0.0, 1.0);
        }
        if !y.0.is_finite() || !y.1.is_finite() {
            y = (0.0, 1.0);
        }
        // Pad so points never sit on the frame; widen degenerate ranges.
        let pad = |(lo, hi): (f64, f64)| {
            let span = hi - lo;
            if span > 0.0 {
                (lo - 0.05 * span, hi + 0.05 * span)
            } else {
                let bump = lo.abs().max(1.0) * 0.1;
                (lo - bump, hi + bump)
            }
        };
        (pad(x), pad(y))
    }

    /// Renders the chart; always a complete, self-contained SVG document.
    pub fn to_svg(&self) -> String {
        let ((x_min, x_max), (y_min, y_max)) = self.data_range();
        let inner_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let inner_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let to_px = |x: f64, y: f64| {
            (
                MARGIN_LEFT + (x - x_min) / (x_max - x_min) * inner_w,
                MARGIN_TOP + (y_max - y) / (y_max - y_min) * inner_h,
            )
        };

        let mut svg = String::new();
        let _ = write!(
            svg,
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"##
        );
        let _ = write!(svg, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"##);
        let _ = write!(
            svg,
            r##"<text x="{}" y="26" text-anchor="middle" font-family="sans-serif" font-size="16" fill="#222">{}</text>"##,
            WIDTH / 2.0,
            escape(&self.title)
        );

        // Grid and ticks.
        let (x_ticks, x_step) = ticks(x_min, x_max);
        let (y_ticks, y_step) = ticks(y_min, y_max);
        for &t in &x_ticks {
            let (px, _) = to_px(t, y_min);
            let _ = write!(
                svg,
                r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#ddd" stroke-width="1"/>"##,
                MARGIN_TOP,
                MARGIN_TOP + inner_h
            );
            let _ = write!(
                svg,
                r##"<text x="{px:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" fill="#444">{}</text>"##,
                MARGIN_TOP + inner_h + 18.0,
                fmt_tick(t, x_step)
            );
        }
        for &t in &y_ticks {
            let (_, py) = to_px(x_min, t);
            let _ = write!(
                svg,
                r##"<line x1="{}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ddd" stroke-width="1"/>"##,
                MARGIN_LEFT,
                MARGIN_LEFT + inner_w
            );
            let _ = write!(
                svg,
                r##"<text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12" fill="#444">{}</text>"##,
                MARGIN_LEFT - 8.0,
                py + 4.0,
                fmt_tick(t, y_step)
            );
        }

        // Frame and axis labels.
        let _ = write!(
            svg,
            r##"<rect x="{}" y="{}" width="{inner_w}" height="{inner_h}" fill="none" stroke="#333" stroke-width="1"/>"##,
            MARGIN_LEFT, MARGIN_TOP
        );
        let _ = write!(
            svg,
            r##"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14" fill="#222">{}</text>"##,
            MARGIN_LEFT + inner_w / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = write!(
            svg,
            r##"<text x="20" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14" fill="#222" transform="rotate(-90 20 {})">{}</text>"##,
            MARGIN_TOP + inner_h / 2.0,
            MARGIN_TOP + inner_h / 2.0,
            escape(&self.y_label)
        );

        // Series.
        for (index, series) in self.series.iter().enumerate() {
            let color = PALETTE[index % PALETTE.len()];
            if let Some(errors) = &series.y_errors {
                for (&(x, y), &e) in series.points.iter().zip(errors) {
                    if e <= 0.0 {
                        continue;
                    }
                    let (px, top) = to_px(x, y + e);
                    let (_, bottom) = to_px(x, y - e);
                    let _ = write!(
                        svg,
                        r##"<line x1="{px:.2}" y1="{top:.2}" x2="{px:.2}" y2="{bottom:.2}" stroke="{color}" stroke-width="1.2"/>"##
                    );
                    for py in [top, bottom] {
                        let _ = write!(
                            svg,
                            r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="{color}" stroke-width="1.2"/>"##,
                            px - 3.0,
                            px + 3.0
                        );
                    }
                }
            }
            if matches!(series.style, SeriesStyle::Line | SeriesStyle::LineAndMarkers)
                && series.points.len() > 1
            {
                let mut path = String::new();
                for &(x, y) in &series.points {
                    let (px, py) = to_px(x, y);
                    let _ = write!(path, "{px:.2},{py:.2} ");
                }
                let _ = write!(
                    svg,
                    r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"##,
                    path.trim_end()
                );
            }
            if matches!(series.style, SeriesStyle::Markers | SeriesStyle::LineAndMarkers) {
                for &(x, y) in &series.points {
                    let (px, py) = to_px(x, y);
                    let _ = write!(
                        svg,
                        r##"<circle cx="{px:.2}" cy="{py:.2}" r="3.2" fill="{color}"/>"##
                    );
                }
            }
        }

        // Legend, top-right inside the frame.
        if self.series.len() > 1 || self.series.iter().any(|s| !s.label.is_empty()) {
            let row_h = 18.0;
            let box_w = 10.0
                + 26.0
                + 7.2 * self.series.iter().map(|s| s.label.chars().count()).max().unwrap_or(0) as f64;
            let box_h = row_h * self.series.len() as f64 + 8.0;
            let x0 = MARGIN_LEFT + inner_w - box_w - 8.0;
            let y0 = MARGIN_TOP + 8.0;
            let _ = write!(
                svg,
                r##"<rect x="{x0:.2}" y="{y0:.2}" width="{box_w:.2}" height="{box_h:.2}" fill="white" opacity="0.88" stroke="#bbb"/>"##
            );
            for (index, series) in self.series.iter().enumerate() {
                let color = PALETTE[index % PALETTE.len()];
                let cy = y0 + 14.0 + row_h * index as f64;
                let _ = write!(
                    svg,
                    r##"<line x1="{:.2}" y1="{cy:.2}" x2="{:.2}" y2="{cy:.2}" stroke="{color}" stroke-width="2.4"/>"##,
                    x0 + 6.0,
                    x0 + 26.0
                );
                let _ = write!(
                    svg,
                    r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" fill="#222">{}</text>"##,
                    x0 + 32.0,
                    cy + 4.0,
                    escape(&series.label)
                );
            }
        }

        svg.push_str("</svg>");
        svg
    }
}

/// Magnitude-matrix view: one square per cell with area proportional to
/// |value| relative to the largest magnitude. Rows and columns are labeled;
/// zeros render as empty cells, which makes sparsity patterns (such as a
/// conservation diagonal) visible at a glance.
pub fn matrix_svg(
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[Vec<f64>],
) -> String {
    let rows = row_labels.len();
    let cols = col_labels.len();
    assert_eq!(values.len(), rows, "one row of values per row label");
    let cell = 44.0;
    let left = 70.0;
    let top = 70.0;
    let width = left + cell * cols as f64 + 24.0;
    let height = top + cell * rows as f64 + 24.0;
    let max_abs = values
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));

    let mut svg = String::new();
    let _ = write!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"##
    );
    let _ = write!(svg, r##"<rect width="{width}" height="{height}" fill="white"/>"##);
    let _ = write!(
        svg,
        r##"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15" fill="#222">{}</text>"##,
        width / 2.0,
        escape(title)
    );
    for (j, label) in col_labels.iter().enumerate() {
        let _ = write!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12" fill="#444">{}</text>"##,
            left + cell * (j as f64 + 0.5),
            top - 10.0,
            escape(label)
        );
    }
    for (i, label) in row_labels.iter().enumerate() {
        let _ = write!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12" fill="#444">{}</text>"##,
            left - 10.0,
            top + cell * (i as f64 + 0.5) + 4.0,
            escape(label)
        );
    }
    for i in 0..rows {
        assert_eq!(values[i].len(), cols, "one value per column label");
        for j in 0..cols {
            let x = left + cell * j as f64;
            let y = top + cell * i as f64;
            let _ = write!(
                svg,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{cell}" height="{cell}" fill="none" stroke="#ddd"/>"##
            );
            if max_abs > 0.0 {
                let side = cell * 0.88 * (values[i][j].abs() / max_abs).sqrt();
                if side > 0.5 {
                    let off = (cell - side) / 2.0;
                    let _ = write!(
                        svg,
                        r##"<rect x="{:.2}" y="{:.2}" width="{side:.2}" height="{side:.2}" fill="#1f77b4"/>"##,
                        x + off,
                        y + off
                    );
                }
            }
        }
    }
    svg.push_str("</svg>");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_lines_markers_and_legend() {
        let mut plot = Plot::new("Shift vs position", "x (mm)", "Δφ (rad)");
        plot.push(Series::line("point case", vec![(0.1, 2.8), (0.4, 1.8), (0.8, 1.1)]));
        plot.push(Series::markers("iris 1.5 mm", vec![(0.1, 2.2), (0.4, 1.5), (0.8, 0.9)]));
        let svg = plot.to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("<circle"));
        assert!(svg.contains("point case"));
        assert!(svg.contains("iris 1.5 mm"));
        assert!(svg.contains("Δφ (rad)"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn error_bars_are_drawn() {
        let mut plot = Plot::new("Counts", "φ (rad)", "counts");
        plot.push(
            Series::markers("data", vec![(0.0, 300.0), (3.0, 150.0), (6.0, 290.0)])
                .with_y_errors(vec![10.0, 8.0, 12.0]),
        );
        let svg = plot.to_svg();
        // Three bars, each a vertical line plus two caps.
        assert_eq!(svg.matches("stroke-width=\"1.2\"").count(), 9);
    }

    #[test]
    fn degenerate_data_still_renders() {
        let mut plot = Plot::new("Flat", "x", "y");
        plot.push(Series::line("const", vec![(0.0, 2.0), (1.0, 2.0)]));
        let svg = plot.to_svg();
        assert!(!svg.contains("NaN"));
        let empty = Plot::new("Empty", "x", "y").to_svg();
        assert!(!empty.contains("NaN"));
        assert!(empty.contains("</svg>"));
    }

    #[test]
    fn tick_steps_are_nice() {
        let (t, step) = ticks(0.0, 1.0);
        assert_eq!(step, 0.2);
        assert!(t.iter().any(|&v| (v - 0.4).abs() < 1e-12));
        let (_, step) = ticks(0.0, 87.0);
        assert_eq!(step, 20.0);
        assert_eq!(fmt_tick(0.4, 0.2), "0.4");
        assert_eq!(fmt_tick(-0.0, 0.2), "0");
        assert_eq!(fmt_tick(20.0, 20.0), "20");
    }

    #[test]
    fn labels_are_escaped() {
        let mut plot = Plot::new("a < b & c", "x", "y");
        plot.push(Series::line("s<1>", vec![(0.0, 0.0), (1.0, 1.0)]));
        let svg = plot.to_svg();
        assert!(svg.contains("a &lt; b &amp; c"));
        assert!(svg.contains("s&lt;1&gt;"));
    }

    #[test]
    fn matrix_view_shows_sparsity() {
        let rows: Vec<String> = (-1..=1).map(|l| l.to_string()).collect();
        let values = vec![
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.5, 0.0],
            vec![1.0, 0.0, 0.0],
        ];
        let svg = matrix_svg("coefficients", &rows, &rows, &values);
        // Background, 9 frame cells, and one filled square per nonzero value.
        assert_eq!(svg.matches("<rect").count(), 1 + 9 + 3);
        assert!(svg.contains("coefficients"));
    }
}
