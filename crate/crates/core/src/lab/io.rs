//! Run configuration, tables on disk and SVG plots.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::FieldSpec;
use crate::lab::glue::GluingReport;
use crate::lab::scan::{ScanRow, ScanTable};
use crate::solver::{multiplier_bounds, SolverConfig};
use crate::{isoperimetric_constant, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanSettings {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            t_min: 0.05,
            t_max: 50.0,
            points: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSettings {
    pub t: Vec<f64>,
    pub center: [f64; 3],
    pub max_iters: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            t: vec![-4.0 * std::f64::consts::PI / 3.0 * 1e-3],
            center: [1.0, 0.0, 0.0],
            max_iters: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlueSettings {
    pub t1: f64,
    pub t2: f64,
    pub points: usize,
}

impl Default for GlueSettings {
    fn default() -> Self {
        Self {
            t1: 4.0 * std::f64::consts::PI / 3.0,
            t2: 2.0,
            points: 41,
        }
    }
}

/// Top-level run configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub level: u32,
    pub field: FieldSpec,
    pub solver: SolverConfig,
    pub scan: ScanSettings,
    pub probe: ProbeSettings,
    pub glue: GlueSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            level: 5,
            field: FieldSpec::new("radial_well").with("a", 0.5),
            solver: SolverConfig::default(),
            scan: ScanSettings::default(),
            probe: ProbeSettings::default(),
            glue: GlueSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.solver.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn write_scan_csv<W: Write>(table: &ScanTable, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in &table.rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_scan_csv<R: Read>(r: R) -> Result<Vec<ScanRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let rows = reader.deserialize().collect::<std::result::Result<Vec<ScanRow>, _>>()?;
    Ok(rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn positive_rows(table: &ScanTable) -> Vec<&ScanRow> {
    table.rows.iter().filter(|r| r.t > 0.0 && r.s_k_value.is_finite()).collect()
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        (lo - 0.5 * lo.abs().max(1.0), hi + 0.5 * hi.abs().max(1.0))
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

type Series = (String, Vec<(f64, f64)>, RGBColor);

fn line_plot(path: &Path, title: &str, x_label: &str, series: &[Series], log_x: bool) -> Result<()> {
    let xs = series.iter().flat_map(|s| s.1.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.1.iter().map(|p| p.1));
    let (x0, x1) = if log_x {
        let (a, b) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        (a, b.max(a * 1.0001))
    } else {
        range(xs)
    };
    let (y0, y1) = range(ys);
    if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
        return Err(Error::Plot(format!("{title}: nothing to plot")));
    }
    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut builder = ChartBuilder::on(&root);
    builder
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(44)
        .y_label_area_size(64);
    macro_rules! draw {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart
                .configure_mesh()
                .x_desc(x_label)
                .draw()
                .map_err(plot_err)?;
            for (name, points, color) in series {
                let color = *color;
                chart
                    .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
                    .map_err(plot_err)?
                    .label(name.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
                chart
                    .draw_series(points.iter().map(|&p| Circle::new(p, 3, color.filled())))
                    .map_err(plot_err)?;
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(plot_err)?;
        }};
    }
    if log_x {
        draw!(builder.build_cartesian_2d((x0..x1).log_scale(), y0..y1).map_err(plot_err)?);
    } else {
        draw!(builder.build_cartesian_2d(x0..x1, y0..y1).map_err(plot_err)?);
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

/// `S_K(t)` against `S t^(2/3)`.
pub fn plot_scan(table: &ScanTable, path: &Path) -> Result<()> {
    let rows = positive_rows(table);
    let s = isoperimetric_constant();
    line_plot(
        path,
        "S_K(t) and S t^(2/3)",
        "t",
        &[
            ("S_K(t)".into(), rows.iter().map(|r| (r.t, r.s_k_value)).collect(), BLUE),
            ("S t^(2/3)".into(), rows.iter().map(|r| (r.t, s * r.t.powf(2.0 / 3.0))).collect(), RED),
        ],
        true,
    )
}

/// `t^(-2/3) S_K(t)` against the constant `S`.
pub fn plot_normalized(table: &ScanTable, path: &Path) -> Result<()> {
    let rows = positive_rows(table);
    let s = isoperimetric_constant();
    line_plot(
        path,
        "normalized S_K",
        "t",
        &[
            ("t^(-2/3) S_K(t)".into(), rows.iter().map(|r| (r.t, r.normalized)).collect(), BLUE),
            ("S".into(), rows.iter().map(|r| (r.t, s)).collect(), RED),
        ],
        true,
    )
}

/// `lambda(t)` with the closed-form bounds for `k0`.
pub fn plot_lambda(table: &ScanTable, k0: f64, path: &Path) -> Result<()> {
    let rows: Vec<&ScanRow> = positive_rows(table).into_iter().filter(|r| r.converged()).collect();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for r in &rows {
        let (lo, hi) = multiplier_bounds(r.t, k0)?;
        lower.push((r.t, lo));
        upper.push((r.t, hi));
    }
    line_plot(
        path,
        "multiplier and bounds",
        "t",
        &[
            ("lambda(t)".into(), rows.iter().map(|r| (r.t, r.lambda)).collect(), BLUE),
            ("lower".into(), lower, GREEN),
            ("upper".into(), upper, RED),
        ],
        true,
    )
}

/// `f(s)` along the gluing path.
pub fn plot_gluing(report: &GluingReport, path: &Path) -> Result<()> {
    line_plot(
        path,
        "gluing energy f(s)",
        "s",
        &[("f(s)".into(), report.s.iter().copied().zip(report.f.iter().copied()).collect(), BLUE)],
        false,
    )
}
