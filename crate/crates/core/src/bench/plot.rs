//! Deterministic SVG renderers: identical inputs produce byte-identical
//! files. Three kinds: trajectory overlays on the motion graph, shadow
//! heatmaps with mass-weighted arc opacity, and simple metric line plots.

use crate::instance::Instance;
use crate::plan::TransportPlan;
use crate::sinkhorn::ShadowTransport;
use std::fmt::Write as _;

const CELL: f64 = 26.0;
const MARGIN: f64 = 14.0;

fn fmt(x: f64) -> String {
    // Fixed three decimals keeps output byte-stable across platforms.
    format!("{x:.3}")
}

/// Vertex center in canvas coordinates. Grids use their row-major layout,
/// general graphs fall back to a circle.
fn layout(instance: &Instance) -> Vec<(f64, f64)> {
    let k = instance.vertex_count();
    if let (Some(w), Some(_h)) = (instance.width(), instance.height()) {
        (0..k)
            .map(|v| {
                let x = (v % w) as f64;
                let y = (v / w) as f64;
                (MARGIN + CELL * (x + 0.5), MARGIN + CELL * (y + 0.5))
            })
            .collect()
    } else {
        let radius = CELL * (k as f64).sqrt().max(2.0);
        let center = radius + MARGIN;
        (0..k)
            .map(|v| {
                let angle = 2.0 * std::f64::consts::PI * v as f64 / k as f64;
                (center + radius * angle.cos(), center + radius * angle.sin())
            })
            .collect()
    }
}

fn canvas_size(instance: &Instance, points: &[(f64, f64)]) -> (f64, f64) {
    if let (Some(w), Some(h)) = (instance.width(), instance.height()) {
        (
            2.0 * MARGIN + CELL * w as f64,
            2.0 * MARGIN + CELL * h as f64,
        )
    } else {
        let max_x = points.iter().map(|p| p.0).fold(0.0f64, f64::max);
        let max_y = points.iter().map(|p| p.1).fold(0.0f64, f64::max);
        (max_x + MARGIN, max_y + MARGIN)
    }
}

fn svg_open(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"##,
        fmt(width),
        fmt(height),
        fmt(width),
        fmt(height)
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="white"/>"##);
}

fn draw_board(out: &mut String, instance: &Instance, points: &[(f64, f64)]) {
    if let (Some(w), Some(h)) = (instance.width(), instance.height()) {
        for y in 0..h {
            for x in 0..w {
                let v = y * w + x;
                let fill = if instance.is_obstacle(v) {
                    "#444444"
                } else {
                    "none"
                };
                let _ = writeln!(
                    out,
                    r##"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="#cccccc" stroke-width="0.5"/>"##,
                    fmt(MARGIN + CELL * x as f64),
                    fmt(MARGIN + CELL * y as f64),
                    fmt(CELL),
                    fmt(CELL),
                    fill
                );
            }
        }
    } else {
        for (v, &(x, y)) in points.iter().enumerate() {
            let fill = if instance.is_obstacle(v) {
                "#444444"
            } else {
                "#f2f2f2"
            };
            let _ = writeln!(
                out,
                r##"<circle cx="{}" cy="{}" r="{}" fill="{}" stroke="#cccccc"/>"##,
                fmt(x),
                fmt(y),
                fmt(CELL * 0.45),
                fill
            );
        }
    }
}

fn draw_markers(out: &mut String, instance: &Instance, points: &[(f64, f64)]) {
    for &g in instance.targets() {
        let (x, y) = points[g];
        let _ = writeln!(
            out,
            r##"<circle cx="{}" cy="{}" r="{}" fill="#7fd4e8"/>"##,
            fmt(x),
            fmt(y),
            fmt(CELL * 0.22)
        );
    }
    for &r in instance.robots() {
        let (x, y) = points[r];
        let s = CELL * 0.26;
        let _ = writeln!(
            out,
            r##"<polygon points="{},{} {},{} {},{}" fill="#d62d20"/>"##,
            fmt(x),
            fmt(y - s),
            fmt(x - s * 0.87),
            fmt(y + s * 0.5),
            fmt(x + s * 0.87),
            fmt(y + s * 0.5)
        );
    }
}

/// Trajectory overlay: one arrow per non-wait unit move, robots as
/// triangles, targets as dots.
pub fn plot_plan_svg(instance: &Instance, plan: &TransportPlan) -> String {
    let points = layout(instance);
    let (width, height) = canvas_size(instance, &points);
    let mut out = String::new();
    svg_open(&mut out, width, height);
    draw_board(&mut out, instance, &points);

    let horizon = plan.horizon().max(1) as f64;
    for t in 1..=plan.horizon() {
        // Early moves draw darker so time reads off the overlay.
        let opacity = 0.35 + 0.6 * (1.0 - (t as f64 - 1.0) / horizon);
        for &(i, j) in plan.slice(t) {
            if i == j {
                continue;
            }
            let (x1, y1) = points[i];
            let (x2, y2) = points[j];
            let dx = x2 - x1;
            let dy = y2 - y1;
            let len = (dx * dx + dy * dy).sqrt().max(1e-9);
            let (ux, uy) = (dx / len, dy / len);
            let (hx, hy) = (x2 - ux * CELL * 0.22, y2 - uy * CELL * 0.22);
            let _ = writeln!(
                out,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#1f4e9c" stroke-width="1.6" stroke-opacity="{}" data-t="{}"/>"##,
                fmt(x1),
                fmt(y1),
                fmt(hx),
                fmt(hy),
                fmt(opacity),
                t
            );
            // Arrowhead.
            let (px, py) = (-uy, ux);
            let _ = writeln!(
                out,
                r##"<polygon points="{},{} {},{} {},{}" fill="#1f4e9c" fill-opacity="{}"/>"##,
                fmt(x2),
                fmt(y2),
                fmt(hx + px * 2.4),
                fmt(hy + py * 2.4),
                fmt(hx - px * 2.4),
                fmt(hy - py * 2.4),
                fmt(opacity)
            );
        }
    }
    draw_markers(&mut out, instance, &points);
    out.push_str("</svg>\n");
    out
}

/// Shadow heatmap: per-edge opacity proportional to total mass across time,
/// annotated with machine-readable attributes for auditing.
pub fn plot_shadow_svg(instance: &Instance, shadow: &ShadowTransport) -> String {
    let points = layout(instance);
    let (width, height) = canvas_size(instance, &points);
    let mut out = String::new();
    svg_open(&mut out, width, height);
    draw_board(&mut out, instance, &points);

    let mut mass = vec![0.0f64; instance.edge_count()];
    for slice in &shadow.slices {
        for (e, &m) in slice.iter().enumerate() {
            mass[e] += m;
        }
    }
    let peak = mass
        .iter()
        .enumerate()
        .filter(|(e, _)| {
            let (i, j) = instance.edge_endpoints(*e);
            i != j
        })
        .map(|(_, &m)| m)
        .fold(0.0f64, f64::max)
        .max(1e-12);

    for (e, &(i, j)) in instance.edges().iter().enumerate() {
        if i == j || mass[e] <= 0.0 {
            continue;
        }
        let (x1, y1) = points[i];
        let (x2, y2) = points[j];
        let opacity = mass[e] / peak;
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#b02a12" stroke-width="2.4" stroke-opacity="{}" data-from="{}" data-to="{}" data-mass="{}"/>"##,
            fmt(x1),
            fmt(y1),
            fmt(x2),
            fmt(y2),
            fmt(opacity),
            i,
            j,
            fmt(mass[e])
        );
    }
    draw_markers(&mut out, instance, &points);
    out.push_str("</svg>\n");
    out
}

/// One named line series.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Minimal deterministic line/scatter chart for metric curves.
pub fn plot_series_svg(series: &[Series], x_label: &str, y_label: &str) -> String {
    const W: f64 = 560.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    let palette = ["#1f4e9c", "#b02a12", "#2a7f3f", "#8a4fb5", "#c77f00"];

    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if all.is_empty() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if (x_max - x_min).abs() < 1e-12 {
        x_max = x_min + 1.0;
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_max = y_min + 1.0;
    }
    let sx = |x: f64| PAD + (x - x_min) / (x_max - x_min) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y_min) / (y_max - y_min) * (H - 2.0 * PAD);

    let mut out = String::new();
    svg_open(&mut out, W, H);
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#333333"/>"##,
        fmt(PAD),
        fmt(H - PAD),
        fmt(W - PAD),
        fmt(H - PAD)
    );
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#333333"/>"##,
        fmt(PAD),
        fmt(PAD),
        fmt(PAD),
        fmt(H - PAD)
    );
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"##,
        fmt(W / 2.0),
        fmt(H - 10.0),
        x_label
    );
    let _ = writeln!(
        out,
        r##"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"##,
        fmt(H / 2.0),
        fmt(H / 2.0),
        y_label
    );
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-size="10">{} .. {}</text>"##,
        fmt(PAD),
        fmt(H - PAD + 14.0),
        fmt(x_min),
        fmt(x_max)
    );
    let _ = writeln!(
        out,
        r##"<text x="4" y="{}" font-size="10">{}</text>"##,
        fmt(PAD),
        fmt(y_max)
    );
    let _ = writeln!(
        out,
        r##"<text x="4" y="{}" font-size="10">{}</text>"##,
        fmt(H - PAD),
        fmt(y_min)
    );

    for (idx, s) in series.iter().enumerate() {
        let color = palette[idx % palette.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(sx(x)), fmt(sy(y))))
            .collect();
        if path.len() > 1 {
            let _ = writeln!(
                out,
                r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"/>"##,
                path.join(" "),
                color
            );
        }
        for &(x, y) in &s.points {
            let _ = writeln!(
                out,
                r##"<circle cx="{}" cy="{}" r="2.6" fill="{}"/>"##,
                fmt(sx(x)),
                fmt(sy(y)),
                color
            );
        }
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" font-size="11" fill="{}">{}</text>"##,
            fmt(W - PAD + 4.0),
            fmt(PAD + 14.0 * idx as f64),
            color,
            s.name
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_grid;
    use crate::plan::TransportPlan;

    #[test]
    fn empty_plan_renders_the_board_only() {
        let inst = generate_grid(3, 3, 1, 1, 2).unwrap();
        let svg = plot_plan_svg(&inst, &TransportPlan::empty());
        assert!(svg.starts_with("<svg"));
        assert!(!svg.contains("<line")); // no move arrows
        assert!(svg.contains("polygon")); // robot marker
    }

    #[test]
    fn forced_move_renders_one_arrow() {
        let inst = generate_grid(1, 2, 0, 1, 1).unwrap();
        let (r, g) = (inst.robots()[0], inst.targets()[0]);
        let plan = TransportPlan::new(2, vec![vec![(r, g)]]).unwrap();
        let svg = plot_plan_svg(&inst, &plan);
        assert_eq!(svg.matches(r##"data-t="1""##).count(), 1);
    }

    #[test]
    fn output_is_byte_identical_across_calls() {
        let inst = generate_grid(4, 4, 2, 3, 8).unwrap();
        let plan = crate::exact::solve_p1(&inst, 6).unwrap().0;
        assert_eq!(plot_plan_svg(&inst, &plan), plot_plan_svg(&inst, &plan));
    }
}
