//! Sweep curves: one polyline per method over log-scaled ratios on a [0, 1]
//! metric axis, each with a shaded ±1 sd band.

use std::path::Path;

use super::experiment::Method;
use super::sweep::SweepResult;
use crate::raster::{Canvas, RasterError, Rgb};

pub const WIDTH: usize = 640;
pub const HEIGHT: usize = 420;
const MARGIN: f64 = 40.0;
const AXIS: Rgb = [40, 40, 40];
const GRID: Rgb = [225, 225, 225];

pub fn method_color(m: Method) -> Rgb {
    match m {
        Method::None => [90, 90, 90],
        Method::PixelSmote => [31, 119, 180],
        Method::DeepSmote => [214, 39, 40],
    }
}

/// Renders metric `metric` (0 acsa, 1 gm, 2 f1) of a sweep.
pub fn render_metric(result: &SweepResult, metric: usize) -> Canvas {
    let mut c = Canvas::new(WIDTH, HEIGHT, [255; 3]);
    let (left, right) = (MARGIN, WIDTH as f64 - MARGIN / 2.0);
    let (top, bottom) = (MARGIN / 2.0, HEIGHT as f64 - MARGIN);
    let y_of = |v: f64| bottom - v.clamp(0.0, 1.0) * (bottom - top);

    let ratios: Vec<f64> = result.points.iter().map(|p| p.ratio.ln()).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x_of = |ratio: f64| {
        if hi > lo {
            left + (ratio.ln() - lo) / (hi - lo) * (right - left)
        } else {
            (left + right) / 2.0
        }
    };

    for tick in 0..=5 {
        let y = y_of(tick as f64 / 5.0).round() as i64;
        c.line((left as i64, y), (right as i64, y), GRID, 1);
    }
    let mut xs: Vec<f64> = result.points.iter().map(|p| p.ratio).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for &r in &xs {
        let x = x_of(r).round() as i64;
        c.line((x, top as i64), (x, bottom as i64), GRID, 1);
        c.line((x, bottom as i64), (x, bottom as i64 + 5), AXIS, 1);
    }
    c.line((left as i64, top as i64), (left as i64, bottom as i64), AXIS, 2);
    c.line((left as i64, bottom as i64), (right as i64, bottom as i64), AXIS, 2);

    for method in result.methods() {
        let series = result.series(method);
        let color = method_color(method);
        let px: Vec<f64> = series.iter().map(|p| x_of(p.ratio)).collect();
        let upper: Vec<f64> = series.iter().map(|p| y_of(p.mean[metric] + p.sd[metric])).collect();
        let lower: Vec<f64> = series.iter().map(|p| y_of(p.mean[metric] - p.sd[metric])).collect();
        c.band(&px, &lower, &upper, color, 0.2);
        let pts: Vec<(i64, i64)> = series
            .iter()
            .zip(&px)
            .map(|(p, &x)| (x.round() as i64, y_of(p.mean[metric]).round() as i64))
            .collect();
        for w in pts.windows(2) {
            c.line(w[0], w[1], color, 2);
        }
        for &(x, y) in &pts {
            c.fill_rect(x - 3, y - 3, x + 3, y + 3, color);
        }
    }
    c
}

pub fn plot_metric(result: &SweepResult, metric: usize, path: &Path) -> Result<(), RasterError> {
    render_metric(result, metric).save(path)
}
