//! SVG figures from per-record evaluation rows.

use std::path::{Path, PathBuf};

use plotters::prelude::*;
use wtap_core::features::{COV_LEN, COV_NAMES};

use crate::error::{CliError, CliResult};
use crate::eval::EvalRow;

const SIZE: (u32, u32) = (1000, 600);
const ELEMENT_COLORS: [RGBColor; COV_LEN] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn plot_err(e: impl std::fmt::Display) -> CliError {
    CliError::Plot(format!("plot rendering failed: {e}"))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

/// Secrecy rate of each method against the record index.
pub fn plot_rates(rows: &[EvalRow], path: &Path, title: &str) -> CliResult<()> {
    if rows.is_empty() {
        return Err(CliError::Usage("no evaluation rows to plot".into()));
    }
    let all = rows.iter().flat_map(|r| [r.dl_rate, r.oracle_rate, r.gsvd_rate]);
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let (lo, hi) = padded(lo.min(0.0), hi);

    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 24))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..rows.len() as f64, lo..hi)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("realization")
        .y_desc("secrecy rate (bits/channel use)")
        .draw()
        .map_err(plot_err)?;

    let series: [(&str, RGBColor, fn(&EvalRow) -> f64); 3] = [
        ("oracle", BLACK, |r| r.oracle_rate),
        ("GSVD", RGBColor(44, 160, 44), |r| r.gsvd_rate),
        ("DL", RGBColor(214, 39, 40), |r| r.dl_rate),
    ];
    for (name, color, get) in series {
        chart
            .draw_series(LineSeries::new(
                rows.iter().enumerate().map(|(i, r)| (i as f64, get(r))),
                color.stroke_width(1),
            ))
            .map_err(plot_err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Estimated against expected covariance entries, one colour per element,
/// with the identity line for reference.
pub fn plot_scatter(rows: &[EvalRow], path: &Path, title: &str) -> CliResult<()> {
    if rows.is_empty() {
        return Err(CliError::Usage("no evaluation rows to plot".into()));
    }
    let all = rows.iter().flat_map(|r| r.estimate.0.into_iter().chain(r.label.0));
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let (lo, hi) = padded(lo, hi);

    let root = SVGBackend::new(path, (700, 700)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 24))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(lo..hi, lo..hi)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("expected")
        .y_desc("estimated")
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new([(lo, lo), (hi, hi)], BLACK.mix(0.5)))
        .map_err(plot_err)?;
    for (k, (&name, color)) in COV_NAMES.iter().zip(ELEMENT_COLORS).enumerate() {
        chart
            .draw_series(
                rows.iter()
                    .map(|r| Circle::new((r.label.0[k], r.estimate.0[k]), 2, color.filled())),
            )
            .map_err(plot_err)?
            .label(name)
            .legend(move |(x, y)| Circle::new((x + 10, y), 4, color.filled()));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperLeft)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Writes `<prefix>_rates.svg` and `<prefix>_scatter.svg` into `dir`.
pub fn render_all(rows: &[EvalRow], dir: &Path, prefix: &str) -> CliResult<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(CliError::Usage("no evaluation rows to plot".into()));
    }
    std::fs::create_dir_all(dir)?;
    let rates = dir.join(format!("{prefix}_rates.svg"));
    let scatter = dir.join(format!("{prefix}_scatter.svg"));
    plot_rates(rows, &rates, &format!("Secrecy rate per realization ({prefix})"))?;
    plot_scatter(rows, &scatter, &format!("Estimated vs expected covariance ({prefix})"))?;
    Ok(vec![rates, scatter])
}
