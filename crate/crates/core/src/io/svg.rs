use std::fmt::Write as _;

/// One polyline.
#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Filled region between two curves sharing x values.
#[derive(Clone, Debug)]
pub struct Band {
    pub color: String,
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Minimal line chart rendered to standalone SVG.
#[derive(Clone, Debug, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
    /// x intervals shaded grey across the full plot height.
    pub shaded: Vec<(f64, f64)>,
    pub log_y: bool,
}

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

impl LinePlot {
    fn transform_y(&self, y: f64) -> Option<f64> {
        if self.log_y {
            (y > 0.0).then(|| y.log10())
        } else {
            Some(y)
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                xs.push(x);
                ys.extend(self.transform_y(y));
            }
        }
        for b in &self.bands {
            xs.extend(&b.x);
            ys.extend(b.lower.iter().chain(&b.upper).filter_map(|y| self.transform_y(*y)));
        }
        let fin = |v: &Vec<f64>| -> (f64, f64) {
            let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-300 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = fin(&xs);
        let (y0, y1) = fin(&ys);
        (x0, x1, y0, y1)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        for &(a, b) in &self.shaded {
            let (xa, xb) = (sx(a.max(x0)), sx(b.min(x1)));
            if xb > xa {
                let _ = writeln!(s, r##"<rect x="{xa:.2}" y="{TOP}" width="{:.2}" height="{ph}" fill="#cccccc" fill-opacity="0.5"/>"##, xb - xa);
            }
        }
        for b in &self.bands {
            let mut pts = Vec::new();
            for (x, y) in b.x.iter().zip(&b.upper) {
                if let Some(t) = self.transform_y(*y) {
                    pts.push(format!("{:.2},{:.2}", sx(*x), sy(t)));
                }
            }
            for (x, y) in b.x.iter().zip(&b.lower).rev() {
                if let Some(t) = self.transform_y(*y) {
                    pts.push(format!("{:.2},{:.2}", sx(*x), sy(t)));
                }
            }
            let _ = writeln!(s, r#"<polygon points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#, pts.join(" "), b.color);
        }
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let ylab = if self.log_y { format!("1e{fy:.1}") } else { format!("{fy:.3e}") };
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{fx:.3}</text>"#, sx(fx), H - BOTTOM + 18.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{ylab}</text>"#, LEFT - 6.0, sy(fy) + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 16.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let pts: Vec<String> = series
                .points
                .iter()
                .filter_map(|&(x, y)| self.transform_y(y).map(|t| format!("{:.2},{:.2}", sx(x), sy(t))))
                .collect();
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#, pts.join(" "), series.color);
            let ly = TOP + 16.0 * k as f64 + 8.0;
            let lx = W - RIGHT + 12.0;
            let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/>"#, lx + 20.0, series.color);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&series.name));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_document() {
        let plot = LinePlot {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                name: "s".into(),
                color: "red".into(),
                points: vec![(0.0, 1.0), (1.0, 2.0)],
                dashed: true,
            }],
            bands: vec![Band {
                color: "blue".into(),
                x: vec![0.0, 1.0],
                lower: vec![0.5, 1.5],
                upper: vec![1.5, 2.5],
            }],
            shaded: vec![(0.8, 2.0)],
            log_y: false,
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg, plot.render());
    }

    #[test]
    fn log_axis_skips_non_positive_values() {
        let plot = LinePlot {
            series: vec![Series {
                name: "e".into(),
                color: "black".into(),
                points: vec![(0.0, 1e-3), (1.0, 0.0), (2.0, 1e-1)],
                dashed: false,
            }],
            log_y: true,
            ..Default::default()
        };
        let svg = plot.render();
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(poly.matches(',').count(), 2);
    }
}
