//! metrics.csv, SVG curve plots and PNG panels.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::image::FloatImage;
use crate::Result;

/// One measured value in long format.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub seed: u64,
    pub method: String,
    /// Sweep variable (stops, degrees, n, lambda ...).
    pub x: f64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub name: String,
    /// Name of the sweep variable, used as the plot x label.
    pub x_label: String,
    pub rows: Vec<MetricRow>,
    pub metadata: BTreeMap<String, String>,
    pub panels: Vec<(String, FloatImage)>,
}

impl ExperimentReport {
    pub fn push(&mut self, seed: u64, method: &str, x: f64, metric: &str, value: f64) {
        self.rows.push(MetricRow {
            seed,
            method: method.to_string(),
            x,
            metric: metric.to_string(),
            value,
        });
    }

    /// Values of `metric` for `method` at `x`, one per seed, in seed order.
    pub fn values(&self, method: &str, x: f64, metric: &str) -> Vec<(u64, f64)> {
        let mut v: Vec<(u64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.metric == metric && (r.x - x).abs() < 1e-12)
            .map(|r| (r.seed, r.value))
            .collect();
        v.sort_by_key(|p| p.0);
        v
    }

    /// Per-method `(x, mean over seeds)` curves of `metric`.
    pub fn curves(&self, metric: &str) -> BTreeMap<String, Vec<(f64, f64)>> {
        let mut acc: BTreeMap<String, BTreeMap<u64, (f64, f64)>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.metric == metric) {
            let e = acc.entry(r.method.clone()).or_default().entry(r.x.to_bits()).or_insert((0.0, 0.0));
            e.0 += r.value;
            e.1 += 1.0;
        }
        acc.into_iter()
            .map(|(m, pts)| {
                let mut c: Vec<(f64, f64)> = pts.into_iter().map(|(x, (s, n))| (f64::from_bits(x), s / n)).collect();
                c.sort_by(|a, b| a.0.total_cmp(&b.0));
                (m, c)
            })
            .collect()
    }

    pub fn metrics(&self) -> Vec<String> {
        let mut m: Vec<String> = self.rows.iter().map(|r| r.metric.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("metrics.csv"))?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        for metric in self.metrics() {
            let svg = svg_plot(&format!("{} {metric}", self.name), &self.x_label, &metric, &self.curves(&metric));
            std::fs::write(dir.join(format!("{metric}.svg")), svg)?;
        }
        let mut meta = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(meta, "{k} = {}", toml_value(v));
        }
        std::fs::write(dir.join("metadata.toml"), meta)?;
        for (name, img) in &self.panels {
            img.write_png(dir.join(format!("{name}.png")))?;
        }
        Ok(())
    }
}

fn toml_value(v: &str) -> String {
    if v.parse::<f64>().is_ok() {
        v.to_string()
    } else {
        format!("{v:?}")
    }
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line plot with one polyline per series.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &BTreeMap<String, Vec<(f64, f64)>>) -> String {
    let (w, h, m) = (640.0, 400.0, 60.0);
    let pts = series.values().flatten();
    let finite = |v: &f64| v.is_finite();
    let xs: Vec<f64> = pts.clone().map(|p| p.0).filter(finite).collect();
    let ys: Vec<f64> = pts.map(|p| p.1).filter(finite).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{m} {} L{} {} M{m} {} L{m} {m}" stroke="black" fill="none"/>"#,
        h - m,
        w - m,
        h - m,
        h - m
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#, sx(fx), h - m + 16.0, tick(fx));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#, m - 6.0, sy(fy) + 4.0, tick(fy));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#, w / 2.0, h - 14.0, escape(x_label));
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {})">{}</text>"#, h / 2.0, h / 2.0, escape(y_label));
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let line: Vec<String> = pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|p| format!("{:.1},{:.1}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#, line.join(" "));
        let ly = m + 18.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}" font-family="sans-serif" font-size="12">{}</text>"#, w - m - 120.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Images side by side with a one-pixel white gap.
pub fn hstack(images: &[&FloatImage]) -> FloatImage {
    let h = images.iter().map(|i| i.height()).max().unwrap_or(1);
    let w = images.iter().map(|i| i.width() + 1).sum::<usize>().saturating_sub(1).max(1);
    let mut out = FloatImage::filled(w, h, 1.0);
    let mut x0 = 0;
    for img in images {
        for r in 0..img.height() {
            for c in 0..img.width() {
                out.set(r, x0 + c, img.get(r, c));
            }
        }
        x0 += img.width() + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_average_over_seeds() {
        let mut r = ExperimentReport::default();
        r.push(1, "a", 0.0, "psnr", 10.0);
        r.push(2, "a", 0.0, "psnr", 20.0);
        r.push(1, "a", 1.0, "psnr", 5.0);
        let c = r.curves("psnr");
        assert_eq!(c["a"], vec![(0.0, 15.0), (1.0, 5.0)]);
        assert_eq!(r.values("a", 0.0, "psnr"), vec![(1, 10.0), (2, 20.0)]);
    }

    #[test]
    fn svg_is_well_formed() {
        let mut series = BTreeMap::new();
        series.insert("q".to_string(), vec![(0.0, 1.0), (1.0, 2.0)]);
        let s = svg_plot("t", "x", "y", &series);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("<polyline"));
    }
}
