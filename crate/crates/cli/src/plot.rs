//! Deterministic SVG plots of a trajectory table.
//!
//! * `error_bound.svg`: `||e(t)||` against the ultimate bound (log scale).
//! * `trajectories.svg`: planar paths of every vertex, or the first
//!   coordinate against time when some stalk is one-dimensional.
//! * `configuration.svg`: initial and final planar configurations.
//! * `trajectories_3d.svg`: spatial paths, when some stalk is 3-dimensional;
//!   planar stalks are drawn at `z = 0`.

use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, ensure, Result};
use plotters::coord::Shift;
use plotters::prelude::*;

use crate::output::Table;

const SIZE: (u32, u32) = (960, 640);
const AGENT: RGBColor = RGBColor(31, 119, 180);
const TARGET: RGBColor = RGBColor(214, 39, 40);
const BOUND: RGBColor = RGBColor(44, 44, 44);
const FLOOR: f64 = 1e-16;

fn plot_err<E: std::error::Error + Send + Sync>(e: DrawingAreaErrorKind<E>) -> anyhow::Error {
    anyhow!("plotting failed: {e}")
}

fn span(values: impl Iterator<Item = f64>) -> Range<f64> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    if !lo.is_finite() || !hi.is_finite() {
        return 0.0..1.0;
    }
    let pad = ((hi - lo) * 0.05).max(1e-9 * hi.abs().max(1.0)).max(1e-12);
    lo - pad..hi + pad
}

struct Paths {
    agents: Vec<(usize, Vec<Vec<f64>>)>,
    targets: Vec<(usize, Vec<Vec<f64>>)>,
}

fn paths(table: &Table) -> Paths {
    let collect = |prefix: &str| {
        table
            .vertices(prefix)
            .into_iter()
            .map(|(v, cols)| {
                (
                    v,
                    table
                        .rows
                        .iter()
                        .map(|r| cols.iter().map(|&c| r[c]).collect())
                        .collect(),
                )
            })
            .collect()
    };
    Paths {
        agents: collect("q"),
        targets: collect("p"),
    }
}

impl Paths {
    fn all(&self) -> impl Iterator<Item = (&Vec<Vec<f64>>, RGBColor)> {
        self.agents
            .iter()
            .map(|(_, x)| (x, AGENT))
            .chain(self.targets.iter().map(|(_, x)| (x, TARGET)))
    }

    fn min_dim(&self) -> usize {
        self.all().map(|(x, _)| x[0].len()).min().unwrap_or(0)
    }

    fn max_dim(&self) -> usize {
        self.all().map(|(x, _)| x[0].len()).max().unwrap_or(0)
    }
}

fn error_bound(table: &Table, area: &DrawingArea<SVGBackend, Shift>) -> Result<()> {
    let t = table
        .column("t")
        .ok_or_else(|| anyhow!("table has no time column"))?;
    let e = table
        .column("e_norm")
        .ok_or_else(|| anyhow!("table has no e_norm column"))?;
    let b = table
        .column("bound")
        .ok_or_else(|| anyhow!("table has no bound column"))?;
    let clamp = |x: f64| x.max(FLOOR);
    let lo = e
        .iter()
        .chain(&b)
        .copied()
        .map(clamp)
        .fold(f64::INFINITY, f64::min);
    let hi = e.iter().chain(&b).copied().map(clamp).fold(0.0, f64::max);
    let mut chart = ChartBuilder::on(area)
        .caption("tracking error and ultimate bound", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(span(t.iter().copied()), (lo / 2.0..hi * 2.0).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("t")
        .y_desc("norm")
        .y_label_formatter(&|y| format!("{y:.0e}"))
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(
            t.iter().zip(&b).map(|(&t, &y)| (t, clamp(y))),
            BOUND.stroke_width(2),
        ))
        .map_err(plot_err)?
        .label("bound")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BOUND.stroke_width(2)));
    chart
        .draw_series(LineSeries::new(
            t.iter().zip(&e).map(|(&t, &y)| (t, clamp(y))),
            AGENT.stroke_width(2),
        ))
        .map_err(plot_err)?
        .label("||e||")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], AGENT.stroke_width(2)));
    chart
        .configure_series_labels()
        .background_style(WHITE)
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    Ok(())
}

fn planar_paths(p: &Paths, area: &DrawingArea<SVGBackend, Shift>) -> Result<()> {
    let xs = span(p.all().flat_map(|(x, _)| x.iter().map(|s| s[0])));
    let ys = span(p.all().flat_map(|(x, _)| x.iter().map(|s| s[1])));
    let mut chart = ChartBuilder::on(area)
        .caption("trajectories (x, y)", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(xs, ys)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("x")
        .y_desc("y")
        .draw()
        .map_err(plot_err)?;
    for (x, color) in p.all() {
        chart
            .draw_series(LineSeries::new(
                x.iter().map(|s| (s[0], s[1])),
                color.stroke_width(1),
            ))
            .map_err(plot_err)?;
    }
    Ok(())
}

fn first_coordinate(table: &Table, p: &Paths, area: &DrawingArea<SVGBackend, Shift>) -> Result<()> {
    let t = table
        .column("t")
        .ok_or_else(|| anyhow!("table has no time column"))?;
    let ys = span(p.all().flat_map(|(x, _)| x.iter().map(|s| s[0])));
    let mut chart = ChartBuilder::on(area)
        .caption("first state coordinate", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(span(t.iter().copied()), ys)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("t")
        .y_desc("x")
        .draw()
        .map_err(plot_err)?;
    for (x, color) in p.all() {
        chart
            .draw_series(LineSeries::new(
                t.iter().zip(x).map(|(&t, s)| (t, s[0])),
                color.stroke_width(1),
            ))
            .map_err(plot_err)?;
    }
    Ok(())
}

fn snapshot(
    p: &Paths,
    k: usize,
    title: &str,
    xs: Range<f64>,
    ys: Range<f64>,
    area: &DrawingArea<SVGBackend, Shift>,
) -> Result<()> {
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(xs, ys)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("x")
        .y_desc("y")
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(
            p.agents
                .iter()
                .map(|(_, x)| Circle::new((x[k][0], x[k][1]), 4, AGENT.filled())),
        )
        .map_err(plot_err)?;
    chart
        .draw_series(
            p.targets
                .iter()
                .map(|(_, x)| TriangleMarker::new((x[k][0], x[k][1]), 7, TARGET.filled())),
        )
        .map_err(plot_err)?;
    Ok(())
}

fn configuration(p: &Paths, area: &DrawingArea<SVGBackend, Shift>) -> Result<()> {
    let last = p.all().next().map(|(x, _)| x.len() - 1).unwrap_or(0);
    let (left, right) = area.split_horizontally(SIZE.0 / 2);
    let pick = |k: usize, c: usize| p.all().map(move |(x, _)| x[k][c]);
    snapshot(p, 0, "initial", span(pick(0, 0)), span(pick(0, 1)), &left)?;
    snapshot(
        p,
        last,
        "final",
        span(pick(last, 0)),
        span(pick(last, 1)),
        &right,
    )?;
    Ok(())
}

fn spatial(p: &Paths, area: &DrawingArea<SVGBackend, Shift>) -> Result<()> {
    let coord = |s: &Vec<f64>, c: usize| s.get(c).copied().unwrap_or(0.0);
    let xs = span(
        p.all()
            .flat_map(|(x, _)| x.iter().map(move |s| coord(s, 0))),
    );
    let ys = span(
        p.all()
            .flat_map(|(x, _)| x.iter().map(move |s| coord(s, 1))),
    );
    let zs = span(
        p.all()
            .flat_map(|(x, _)| x.iter().map(move |s| coord(s, 2))),
    );
    let mut chart = ChartBuilder::on(area)
        .caption("trajectories (x, y, z)", ("sans-serif", 22))
        .margin(12)
        .build_cartesian_3d(xs, zs, ys)
        .map_err(plot_err)?;
    chart.with_projection(|mut m| {
        m.yaw = 0.6;
        m.pitch = 0.35;
        m.scale = 0.85;
        m.into_matrix()
    });
    chart.configure_axes().draw().map_err(plot_err)?;
    for (x, color) in p.all() {
        chart
            .draw_series(LineSeries::new(
                x.iter().map(|s| (coord(s, 0), coord(s, 2), coord(s, 1))),
                color.stroke_width(1),
            ))
            .map_err(plot_err)?;
    }
    Ok(())
}

fn render(
    path: &Path,
    draw: impl FnOnce(&DrawingArea<SVGBackend, Shift>) -> Result<()>,
) -> Result<PathBuf> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        draw(&root)?;
        root.present().map_err(plot_err)?;
    }
    std::fs::write(path, svg)?;
    Ok(path.to_path_buf())
}

/// Writes the plots for `table` into `dir` and returns their paths.
pub fn emit_plots(table: &Table, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure!(
        table.len() >= 2,
        "cannot plot a trajectory with fewer than two records"
    );
    let p = paths(table);
    ensure!(
        !p.agents.is_empty() && !p.targets.is_empty(),
        "table has no agent or target columns"
    );
    let mut out = vec![render(&dir.join("error_bound.svg"), |a| {
        error_bound(table, a)
    })?];
    if p.min_dim() >= 2 {
        out.push(render(&dir.join("trajectories.svg"), |a| {
            planar_paths(&p, a)
        })?);
        out.push(render(&dir.join("configuration.svg"), |a| {
            configuration(&p, a)
        })?);
    } else {
        out.push(render(&dir.join("trajectories.svg"), |a| {
            first_coordinate(table, &p, a)
        })?);
    }
    if p.max_dim() >= 3 {
        out.push(render(&dir.join("trajectories_3d.svg"), |a| {
            spatial(&p, a)
        })?);
    }
    Ok(out)
}
