//! SVG rendering of a solution.
//!
//! Each vehicle's route is a solid closed polyline in its own colour.
//! Pickup/delivery pairs are joined by dashed chords and the zero-cost legs
//! through the virtual node are dotted. Depots are squares (filled at the
//! origin, hollow at the destination); demand points are circles (filled
//! at the pickup, hollow at the delivery). Output bytes depend only on the
//! inputs.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::instance::{Instance, NodeKind};
use crate::oracle::validate_tour;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// Canvas position of every node. Planar instances use their coordinates;
/// graph instances without coordinates are laid out on a circle in node
/// order. The virtual node sits above the drawing.
fn canvas_positions(instance: &Instance) -> Vec<[f64; 2]> {
    let locs = instance.locations();
    let v = instance.v();
    let raw: Vec<Option<[f64; 2]>> = locs.iter().map(|l| l.and_then(|l| l.point())).collect();
    let planar = raw.iter().skip(1).all(Option::is_some);
    let pts: Vec<[f64; 2]> = if planar {
        raw.iter().skip(1).map(|p| p.unwrap()).collect()
    } else {
        (1..v)
            .map(|a| {
                let t = std::f64::consts::TAU * (a - 1) as f64 / (v - 1) as f64;
                [t.cos(), t.sin()]
            })
            .collect()
    };
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let scale = (WIDTH - 2.0 * MARGIN) / span;
    let mut out = Vec::with_capacity(v);
    out.push([WIDTH / 2.0, MARGIN / 3.0]);
    for p in pts {
        // flip y so larger coordinates are drawn higher
        out.push([
            MARGIN + (p[0] - lo[0]) * scale,
            HEIGHT - MARGIN - (p[1] - lo[1]) * scale,
        ]);
    }
    out
}

fn fmt_points(pts: &[[f64; 2]]) -> String {
    pts.iter()
        .map(|p| format!("{:.2},{:.2}", p[0], p[1]))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders validated routes as an SVG document.
pub fn render_svg(instance: &Instance, routes: &[Vec<usize>]) -> Result<String> {
    validate_tour(instance, routes).map_err(Error::Infeasible)?;
    let layout = instance.layout();
    let pos = canvas_positions(instance);
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"##
    );
    let _ = writeln!(w, r##"<rect width="100%" height="100%" fill="white"/>"##);

    let _ = writeln!(
        w,
        r##"<g id="virtual-edges" stroke="#777777" stroke-width="1" stroke-dasharray="1,4" fill="none">"##
    );
    let k = layout.k();
    for j in 0..k {
        let from = layout.destination(j);
        if j + 1 < k {
            let to = layout.origin(j + 1);
            let _ = writeln!(
                w,
                r##"<polyline points="{}"/>"##,
                fmt_points(&[pos[from], pos[to]])
            );
        } else {
            let (o, first) = (layout.virtual_node(), layout.origin(0));
            let _ = writeln!(
                w,
                r##"<polyline points="{}"/>"##,
                fmt_points(&[pos[from], pos[o], pos[first]])
            );
        }
    }
    let _ = writeln!(w, "</g>");

    let _ = writeln!(
        w,
        r##"<g id="associations" stroke="#555555" stroke-width="1" stroke-dasharray="6,4" fill="none">"##
    );
    for i in 0..layout.n() {
        let (p, d) = (pos[layout.pickup(i)], pos[layout.delivery(i)]);
        let _ = writeln!(
            w,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"##,
            p[0], p[1], d[0], d[1]
        );
    }
    let _ = writeln!(w, "</g>");

    let _ = writeln!(w, r##"<g id="routes" stroke-width="2" fill="none">"##);
    for (j, r) in routes.iter().enumerate() {
        let mut pts: Vec<[f64; 2]> = r.iter().map(|&a| pos[a]).collect();
        pts.push(pos[r[0]]);
        let colour = PALETTE[j % PALETTE.len()];
        let _ = writeln!(
            w,
            r##"<polyline class="route" stroke="{colour}" points="{}"/>"##,
            fmt_points(&pts)
        );
    }
    let _ = writeln!(w, "</g>");

    let owner = crate::graph_core::route_assignment(layout, routes);
    let _ = writeln!(
        w,
        r##"<g id="markers" stroke-width="1.5" font-family="sans-serif" font-size="11">"##
    );
    for a in 1..layout.v() {
        let [x, y] = pos[a];
        let colour = |j: usize| PALETTE[j % PALETTE.len()];
        let marker = match layout.kind(a) {
            NodeKind::Origin(j) => format!(
                r##"<rect class="depot" x="{:.2}" y="{:.2}" width="10" height="10" fill="{c}" stroke="{c}"/>"##,
                x - 5.0,
                y - 5.0,
                c = colour(j)
            ),
            NodeKind::Destination(j) => format!(
                r##"<rect class="depot" x="{:.2}" y="{:.2}" width="10" height="10" fill="white" stroke="{c}"/>"##,
                x - 5.0,
                y - 5.0,
                c = colour(j)
            ),
            NodeKind::Pickup(i) => {
                format!(
                    r##"<circle class="pickup" cx="{x:.2}" cy="{y:.2}" r="5" fill="{c}" stroke="{c}"/>"##,
                    c = colour(owner[i])
                )
            }
            NodeKind::Delivery(i) => {
                format!(
                    r##"<circle class="delivery" cx="{x:.2}" cy="{y:.2}" r="5" fill="white" stroke="{c}"/>"##,
                    c = colour(owner[i])
                )
            }
            NodeKind::Virtual => unreachable!(),
        };
        let _ = writeln!(w, "{marker}");
        let _ = writeln!(
            w,
            r##"<text x="{:.2}" y="{:.2}">{}</text>"##,
            x + 7.0,
            y - 7.0,
            layout.name(a)
        );
    }
    let [x, y] = pos[layout.virtual_node()];
    let _ = writeln!(
        w,
        r##"<circle class="virtual" cx="{x:.2}" cy="{y:.2}" r="3" fill="#777777"/>"##
    );
    let _ = writeln!(
        w,
        r##"<text x="{:.2}" y="{:.2}">O</text>"##,
        x + 6.0,
        y + 4.0
    );
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, "</svg>");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::random_instance;
    use crate::oracle::enumerate_optimum;

    fn segments(svg: &str) -> Vec<usize> {
        svg.lines()
            .filter(|l| l.contains(r##"class="route""##))
            .map(|l| {
                let pts = l
                    .split("points=\"")
                    .nth(1)
                    .unwrap()
                    .split('"')
                    .next()
                    .unwrap();
                pts.split(' ').count() - 1
            })
            .collect()
    }

    #[test]
    fn single_customer_route_has_four_segments() {
        let inst = random_instance(1, 1, 1, 0).unwrap();
        let opt = enumerate_optimum(&inst).unwrap();
        let svg = render_svg(&inst, &opt.routes).unwrap();
        assert_eq!(segments(&svg), vec![4]);
        assert_eq!(svg.matches("<line ").count(), 1);
    }

    #[test]
    fn one_closed_route_per_vehicle_and_one_chord_per_customer() {
        let inst = random_instance(5, 2, 2, 3).unwrap();
        let opt = enumerate_optimum(&inst).unwrap();
        let svg = render_svg(&inst, &opt.routes).unwrap();
        assert_eq!(segments(&svg).len(), 2);
        assert_eq!(svg.matches("<line ").count(), 5);
        assert_eq!(svg.matches(r##"class="depot""##).count(), 4);
        assert_eq!(svg.matches(r##"class="pickup""##).count(), 5);
        assert_eq!(svg.matches(r##"class="delivery""##).count(), 5);
        assert_eq!(svg, render_svg(&inst, &opt.routes).unwrap());
    }

    #[test]
    fn mismatched_solution_is_rejected() {
        let inst = random_instance(3, 1, 1, 0).unwrap();
        let other = random_instance(2, 1, 1, 0).unwrap();
        let routes = enumerate_optimum(&other).unwrap().routes;
        assert!(render_svg(&inst, &routes).is_err());
    }
}
