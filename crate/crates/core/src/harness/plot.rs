//! Self-contained SVG plots and band CSVs.

use std::fmt::Write as _;
use std::path::Path;

use super::HarnessError;
use crate::regression::PosteriorGaussian;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;

/// Mean with a 95% band, `mean ± 1.96·sd`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Band {
    /// Band of the latent function (observation noise excluded).
    pub fn latent(post: &PosteriorGaussian) -> Self {
        let mean: Vec<f64> = post.mean().iter().copied().collect();
        let half: Vec<f64> = (0..post.len())
            .map(|i| 1.96 * post.variance(i).max(0.0).sqrt())
            .collect();
        Self {
            lower: mean.iter().zip(&half).map(|(m, h)| m - h).collect(),
            upper: mean.iter().zip(&half).map(|(m, h)| m + h).collect(),
            mean,
        }
    }
}

/// Writes `query,mean,lower95,upper95,sample0,...`.
pub fn write_band_csv(
    path: &Path,
    query: &[f64],
    band: &Band,
    samples: &[Vec<f64>],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    let mut header = vec![
        "query".to_string(),
        "mean".into(),
        "lower95".into(),
        "upper95".into(),
    ];
    header.extend((0..samples.len()).map(|s| format!("sample{s}")));
    w.write_record(&header).map_err(HarnessError::Csv)?;
    for i in 0..query.len() {
        let mut rec = vec![
            query[i].to_string(),
            band.mean[i].to_string(),
            band.lower[i].to_string(),
            band.upper[i].to_string(),
        ];
        rec.extend(samples.iter().map(|s| s[i].to_string()));
        w.write_record(&rec).map_err(HarnessError::Csv)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit<'a>(xs: impl Iterator<Item = &'a f64>, ys: impl Iterator<Item = &'a f64>) -> Self {
        let range = |it: &mut dyn Iterator<Item = &'a f64>| {
            let (lo, hi) = it
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                    (a.min(*v), b.max(*v))
                });
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let mut xs = xs;
        let mut ys = ys;
        Self {
            x: range(&mut xs),
            y: range(&mut ys),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn polyline(frame: &Frame, xs: &[f64], ys: &[f64]) -> String {
    let mut s = String::new();
    for (x, y) in xs.iter().zip(ys) {
        let _ = write!(s, "{:.2},{:.2} ", frame.px(*x), frame.py(*y));
    }
    s.trim_end().to_string()
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn axes(frame: &Frame) -> String {
    let mut s = format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for (v, anchor_x, anchor_y) in [
        (frame.x.0, frame.px(frame.x.0), HEIGHT - MARGIN + 16.0),
        (frame.x.1, frame.px(frame.x.1), HEIGHT - MARGIN + 16.0),
    ] {
        let _ = writeln!(
            s,
            "<text x=\"{anchor_x:.2}\" y=\"{anchor_y:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{v:.3}</text>"
        );
    }
    for v in [frame.y.0, frame.y.1] {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{v:.3}</text>",
            MARGIN - 4.0,
            frame.py(v) + 3.0
        );
    }
    s
}

/// Line plot of a 1-d posterior with its band, optional truth curve and
/// observed points.
pub struct LinePlot<'a> {
    pub title: &'a str,
    pub x: &'a [f64],
    pub band: &'a Band,
    pub truth: Option<&'a [f64]>,
    pub observed: Option<(&'a [f64], &'a [f64])>,
}

impl LinePlot<'_> {
    pub fn to_svg(&self) -> String {
        let obs_x = self.observed.map(|o| o.0).unwrap_or(&[]);
        let obs_y = self.observed.map(|o| o.1).unwrap_or(&[]);
        let truth = self.truth.unwrap_or(&[]);
        let frame = Frame::fit(
            self.x.iter().chain(obs_x),
            self.band
                .lower
                .iter()
                .chain(&self.band.upper)
                .chain(truth)
                .chain(obs_y),
        );
        let mut s = header(self.title);
        s.push_str(&axes(&frame));
        if !self.x.is_empty() {
            let mut outline = polyline(&frame, self.x, &self.band.upper);
            let rev_x: Vec<f64> = self.x.iter().rev().copied().collect();
            let rev_lo: Vec<f64> = self.band.lower.iter().rev().copied().collect();
            outline.push(' ');
            outline.push_str(&polyline(&frame, &rev_x, &rev_lo));
            let _ = writeln!(s, "<polygon points=\"{outline}\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>");
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\"/>",
                polyline(&frame, self.x, &self.band.mean)
            );
        }
        if !truth.is_empty() {
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#d95f0e\" stroke-dasharray=\"4 3\"/>",
                polyline(&frame, self.x, truth)
            );
        }
        for (x, y) in obs_x.iter().zip(obs_y) {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"black\"/>",
                frame.px(*x),
                frame.py(*y)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Heat map of `values` on a `side × side` grid (first index fastest).
pub fn heatmap_svg(title: &str, side: usize, values: &[f64]) -> String {
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cell_w = (WIDTH - 2.0 * MARGIN) / side as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / side as f64;
    let mut s = header(title);
    for j in 0..side {
        for i in 0..side {
            let v = values[j * side + i];
            let t = if v.is_finite() { (v - lo) / span } else { 0.0 };
            let (r, g, b) = (
                (255.0 * t) as u8,
                (80.0 + 100.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8,
                (255.0 * (1.0 - t)) as u8,
            );
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({r},{g},{b})\"/>",
                MARGIN + i as f64 * cell_w,
                HEIGHT - MARGIN - (j + 1) as f64 * cell_h,
                cell_w + 0.05,
                cell_h + 0.05
            );
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"{MARGIN}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">min {lo:.3}, max {hi:.3}</text>",
        HEIGHT - 12.0
    );
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, svg: &str) -> Result<(), HarnessError> {
    std::fs::write(path, svg).map_err(|e| HarnessError::io(path, e))
}
