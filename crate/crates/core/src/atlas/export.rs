use std::fmt::Write;

use super::sweep::{StepStatus, SweepReport};
use super::{AtlasGrid, Bounds, CellClass, ExclusionBall, Plane};
use crate::fourier::io::{fmt_c64, fmt_f64};

fn plane_name(p: Plane) -> &'static str {
    match p {
        Plane::Lambda => "lambda",
        Plane::Epsilon => "epsilon",
    }
}

fn fmt_k(k: &[i64]) -> String {
    k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// One line per ball: `k branch center_re center_im radius`.
pub fn render_balls_table(balls: &[ExclusionBall], plane: Plane) -> String {
    let mut out = format!("# balls plane={}\n# k branch re im radius\n", plane_name(plane));
    for b in balls {
        writeln!(
            out,
            "{} {} {} {}",
            fmt_k(&b.k),
            b.branch,
            fmt_c64(b.center),
            fmt_f64(b.radius)
        )
        .unwrap();
    }
    out
}

/// One line per cell: `ix iy re im class [k]`.
pub fn render_grid_table(grid: &AtlasGrid) -> String {
    let (nx, ny) = grid.resolution;
    let mut out = format!(
        "# atlas plane={} nx={nx} ny={ny}\n# ix iy re im class k\n",
        plane_name(grid.plane)
    );
    for iy in 0..ny {
        for ix in 0..nx {
            let z = grid.cell_center(ix, iy);
            let class = match grid.class_at(ix, iy) {
                CellClass::Inside => "inside".to_string(),
                CellClass::Excluded(k) => format!("excluded {}", fmt_k(k)),
                CellClass::OutsideR0 => "outside".to_string(),
            };
            writeln!(out, "{ix} {iy} {} {class}", fmt_c64(z)).unwrap();
        }
    }
    out
}

/// One line per attempted point: `eps_re eps_im status residual iterations mu...`.
pub fn render_sweep_table(report: &SweepReport) -> String {
    let mut out = String::from("# sweep\n# re im status residual iterations mu\n");
    for s in &report.steps {
        let status = match &s.status {
            StepStatus::Converged => "converged".to_string(),
            StepStatus::Halved(_) => "halved".to_string(),
            StepStatus::Obstructed(k) => format!("obstructed:{}", fmt_k(k)),
            StepStatus::Detour(k) => format!("detour:{}", fmt_k(k)),
            StepStatus::Failed(_) => "failed".to_string(),
        };
        let mu: Vec<String> = s.mu.iter().map(|z| fmt_c64(*z)).collect();
        writeln!(
            out,
            "{} {status} {} {} {}",
            fmt_c64(s.eps),
            fmt_f64(s.residual),
            s.iterations,
            mu.join(" ")
        )
        .unwrap();
    }
    writeln!(
        out,
        "# reached_end={} path_length={} endpoint_distance={}",
        report.reached_end,
        fmt_f64(report.path_length),
        fmt_f64(report.endpoint_distance)
    )
    .unwrap();
    out
}

/// SVG of the grid classification (if any) with the balls drawn on top.
/// Balls are drawn at their true radius, with a one-pixel minimum.
pub fn render_svg(bounds: Bounds, grid: Option<&AtlasGrid>, balls: &[ExclusionBall], width: usize) -> String {
    let w = bounds.re_max - bounds.re_min;
    let h = bounds.im_max - bounds.im_min;
    let scale = width as f64 / w;
    let height = (h * scale).round().max(1.0) as usize;
    let px = |re: f64| (re - bounds.re_min) * scale;
    let py = |im: f64| (bounds.im_max - im) * scale;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if let Some(g) = grid {
        let (nx, ny) = g.resolution;
        let cw = (g.bounds.re_max - g.bounds.re_min) / nx as f64 * scale;
        let ch = (g.bounds.im_max - g.bounds.im_min) / ny as f64 * scale;
        for iy in 0..ny {
            for ix in 0..nx {
                let fill = match g.class_at(ix, iy) {
                    CellClass::Inside => continue,
                    CellClass::Excluded(_) => "#444444",
                    CellClass::OutsideR0 => "#dddddd",
                };
                let c = g.cell_center(ix, iy);
                writeln!(
                    out,
                    "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{fill}\"/>",
                    px(c.re) - cw / 2.0,
                    py(c.im) - ch / 2.0,
                    cw,
                    ch
                )
                .unwrap();
            }
        }
    }
    for b in balls {
        writeln!(
            out,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"black\"><title>k={}</title></circle>",
            px(b.center.re),
            py(b.center.im),
            (b.radius * scale).max(1.0),
            fmt_k(&b.k)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
