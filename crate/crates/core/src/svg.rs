//! Log-log line plots as standalone SVG.

use std::fmt::Write;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Decade-aligned log10 axes covering every positive data point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogAxes {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl LogLogAxes {
    pub fn fit(series: &[Series]) -> Self {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for (a, b) in series.iter().flat_map(|s| s.points.iter()).filter(|(a, b)| *a > 0.0 && *b > 0.0) {
            x = (x.0.min(a.log10()), x.1.max(a.log10()));
            y = (y.0.min(b.log10()), y.1.max(b.log10()));
        }
        let span = |(lo, hi): (f64, f64)| {
            if !lo.is_finite() {
                (0.0, 1.0)
            } else {
                let (lo, hi) = (lo.floor(), hi.ceil());
                (lo, if hi > lo { hi } else { lo + 1.0 })
            }
        };
        LogLogAxes { x_range: span(x), y_range: span(y) }
    }

    pub fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        let u = (x.log10() - self.x_range.0) / (self.x_range.1 - self.x_range.0);
        let v = (y.log10() - self.y_range.0) / (self.y_range.1 - self.y_range.0);
        (MARGIN + u * (WIDTH - 2.0 * MARGIN), HEIGHT - MARGIN - v * (HEIGHT - 2.0 * MARGIN))
    }

    pub fn from_pixel(&self, px: f64, py: f64) -> (f64, f64) {
        let u = (px - MARGIN) / (WIDTH - 2.0 * MARGIN);
        let v = (HEIGHT - MARGIN - py) / (HEIGHT - 2.0 * MARGIN);
        (
            10f64.powf(self.x_range.0 + u * (self.x_range.1 - self.x_range.0)),
            10f64.powf(self.y_range.0 + v * (self.y_range.1 - self.y_range.0)),
        )
    }
}

/// One polyline per series; non-positive points are skipped.
pub fn loglog_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let axes = LogLogAxes::fit(series);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#, right - left, bottom - top);
    for d in axes.x_range.0 as i32..=axes.x_range.1 as i32 {
        let (px, _) = axes.to_pixel(10f64.powi(d), 10f64.powf(axes.y_range.0));
        let _ = writeln!(s, r##"<line x1="{px:.3}" y1="{top}" x2="{px:.3}" y2="{bottom}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{px:.3}" y="{}" text-anchor="middle">1e{d}</text>"#, bottom + 16.0);
    }
    for d in axes.y_range.0 as i32..=axes.y_range.1 as i32 {
        let (_, py) = axes.to_pixel(10f64.powf(axes.x_range.0), 10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{left}" y1="{py:.3}" x2="{right}" y2="{py:.3}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.3}" text-anchor="end">1e{d}</text>"#, left - 6.0, py + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 20.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (k, series) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .filter(|(a, b)| *a > 0.0 && *b > 0.0)
            .map(|(a, b)| {
                let (px, py) = axes.to_pixel(*a, *b);
                format!("{px:.9},{py:.9}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline data-series="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape(&series.name),
            pts.join(" ")
        );
        let ly = top + 16.0 + 16.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, right - 130.0, right - 110.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, right - 104.0, ly + 4.0, escape(&series.name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polylines(svg: &str) -> Vec<Vec<(f64, f64)>> {
        svg.lines()
            .filter(|l| l.starts_with("<polyline"))
            .map(|l| {
                let pts = l.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
                pts.split(' ')
                    .filter(|p| !p.is_empty())
                    .map(|p| {
                        let (a, b) = p.split_once(',').unwrap();
                        (a.parse().unwrap(), b.parse().unwrap())
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn one_polyline_per_series_and_inverse_transform() {
        let series = vec![
            Series { name: "multiscale".into(), points: vec![(0.375, 0.7), (0.3, 0.18), (0.24, 0.011)] },
            Series { name: "single <scale>".into(), points: vec![(0.375, 0.7), (0.3, 0.4), (0.24, 0.2)] },
        ];
        let svg = loglog_svg("t", "h", "error", &series);
        let lines = polylines(&svg);
        assert_eq!(lines.len(), 2);
        let axes = LogLogAxes::fit(&series);
        for (line, s) in lines.iter().zip(&series) {
            for ((px, py), (x, y)) in line.iter().zip(&s.points) {
                let (bx, by) = axes.from_pixel(*px, *py);
                assert!((bx - x).abs() < 1e-6 && (by - y).abs() < 1e-6);
            }
        }
        assert!(svg.contains("single &lt;scale&gt;"));
    }

    #[test]
    fn empty_series_still_renders() {
        let svg = loglog_svg("t", "x", "y", &[Series { name: "none".into(), points: vec![(0.0, 1.0)] }]);
        assert_eq!(polylines(&svg).len(), 1);
        assert!(svg.ends_with("</svg>\n"));
    }
}
