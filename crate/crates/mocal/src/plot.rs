//! Static SVG plots for evaluation runs: the per-frame lowest-joint height
//! trace and the horizontal root trajectory with a temporal color gradient.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::motion::MotionSequence;

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

/// Lowest-joint height per frame for up to a handful of motions, with the
/// ground plane and the contact threshold marked.
pub fn plot_height_trace(
    motions: &[(String, &MotionSequence)],
    contact_threshold: f64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let path_str = path.to_string_lossy().to_string();
    let root = SVGBackend::new(&path_str, (900, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;

    let max_frames = motions
        .iter()
        .map(|(_, m)| m.frame_count())
        .max()
        .unwrap_or(1);
    let (mut y_min, mut y_max) = (0.0f64, contact_threshold * 2.0);
    for (_, m) in motions {
        for i in 0..m.frame_count() {
            let h = m.lowest_joint_height(i);
            y_min = y_min.min(h);
            y_max = y_max.max(h);
        }
    }
    let pad = 0.05 * (y_max - y_min).max(0.01);

    let mut chart = ChartBuilder::on(&root)
        .caption("lowest joint height", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..max_frames as f64, (y_min - pad)..(y_max + pad))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("frame")
        .y_desc("height (m)")
        .draw()
        .map_err(plot_err)?;

    chart
        .draw_series(LineSeries::new(
            [(0.0, 0.0), (max_frames as f64, 0.0)],
            BLACK.stroke_width(1),
        ))
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(
            [
                (0.0, contact_threshold),
                (max_frames as f64, contact_threshold),
            ],
            RGBColor(150, 150, 150).stroke_width(1),
        ))
        .map_err(plot_err)?
        .label("contact threshold");

    let palette = [
        RGBColor(31, 119, 180),
        RGBColor(255, 127, 14),
        RGBColor(44, 160, 44),
        RGBColor(214, 39, 40),
        RGBColor(148, 103, 189),
    ];
    for (k, (name, m)) in motions.iter().enumerate() {
        let color = palette[k % palette.len()];
        let series: Vec<(f64, f64)> = (0..m.frame_count())
            .map(|i| (i as f64, m.lowest_joint_height(i)))
            .collect();
        chart
            .draw_series(LineSeries::new(series, color.stroke_width(2)))
            .map_err(plot_err)?
            .label(name.clone())
            .legend(move |(x, y)| {
                PathElement::new([(x, y), (x + 16, y)], color.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Horizontal (x, z) trajectory of the first joint, drawn as short segments
/// whose color fades from bright to dark with time.
pub fn plot_trajectory(motion: &MotionSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let path_str = path.to_string_lossy().to_string();
    let root = SVGBackend::new(&path_str, (600, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;

    let t = motion.frame_count();
    let points: Vec<(f64, f64)> = (0..t)
        .map(|i| {
            let p = motion.joint(i, 0);
            (p[0], p[2])
        })
        .collect();
    let (mut x_min, mut x_max, mut z_min, mut z_max) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, z) in &points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        z_min = z_min.min(z);
        z_max = z_max.max(z);
    }
    let pad = 0.1 * ((x_max - x_min).max(z_max - z_min)).max(0.5);

    let mut chart = ChartBuilder::on(&root)
        .caption("root trajectory (bright to dark over time)", ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(50)
        .build_cartesian_2d((x_min - pad)..(x_max + pad), (z_min - pad)..(z_max + pad))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("x (m)")
        .y_desc("z (m)")
        .draw()
        .map_err(plot_err)?;

    for i in 0..t.saturating_sub(1) {
        let f = i as f64 / (t - 1).max(1) as f64;
        let lerp = |a: f64, b: f64| (a + (b - a) * f) as u8;
        let color = RGBColor(lerp(140.0, 10.0), lerp(190.0, 40.0), lerp(255.0, 110.0));
        chart
            .draw_series(LineSeries::new(
                [points[i], points[i + 1]],
                color.stroke_width(2),
            ))
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}
