//! SVG rendering of the table, trails and final poses.

use std::fmt::Write;

use super::{Shape, World};

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Render the world as a standalone SVG document. The y axis is flipped so
/// that north is up.
pub fn render_svg(world: &World) -> String {
    let size = world.cfg.table_size;
    let cell = world.cfg.cell();
    let fy = |y: f64| size - y;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="-10 -10 {w} {w}" width="800" height="800">"#,
        w = size + 20.0
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{size}" height="{size}" fill="#fafafa" stroke="#333"/>"##);
    for i in 1..world.cfg.grid_n {
        let p = i as f64 * cell;
        let _ = writeln!(s, r##"<line x1="{p:.2}" y1="0" x2="{p:.2}" y2="{size}" stroke="#e4e4e4" stroke-width="0.5"/>"##);
        let _ = writeln!(s, r##"<line x1="0" y1="{p:.2}" x2="{size}" y2="{p:.2}" stroke="#e4e4e4" stroke-width="0.5"/>"##);
    }
    for o in world.objects.values() {
        let (x, y) = (o.pose.x, fy(o.pose.y));
        match o.shape {
            Shape::Circle { radius } => {
                let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="{radius:.2}" fill="#bbb" stroke="#555"><title>{}</title></circle>"##, o.id);
            }
            Shape::Rect { w, h } => {
                let _ = writeln!(
                    s,
                    r##"<rect x="{:.2}" y="{:.2}" width="{w:.2}" height="{h:.2}" fill="#999" stroke="#444" transform="rotate({:.2} {x:.2} {y:.2})"><title>{}</title></rect>"##,
                    x - w / 2.0,
                    y - h / 2.0,
                    -o.pose.heading,
                    o.id
                );
            }
        }
        if o.trail.len() > 1 {
            let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#777" stroke-dasharray="4 3"/>"##, points(&o.trail, size));
        }
    }
    for (i, r) in world.robots.values().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if r.trail.len() > 1 {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, points(&r.trail, size));
        }
        let (x, y) = (r.pose.x, fy(r.pose.y));
        let half = r.footprint / 2.0;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{f:.2}" height="{f:.2}" fill="{color}" fill-opacity="0.6" transform="rotate({:.2} {x:.2} {y:.2})"><title>{}</title></rect>"#,
            x - half,
            y - half,
            -r.pose.heading,
            r.id,
            f = r.footprint
        );
        let th = r.pose.heading.to_radians();
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{:.2}" stroke="#000" stroke-width="2"/>"##,
            x + half * th.cos(),
            y - half * th.sin()
        );
    }
    s.push_str("</svg>\n");
    s
}

fn points(trail: &[crate::geometry::Point], size: f64) -> String {
    trail.iter().map(|p| format!("{:.2},{:.2}", p.x, size - p.y)).collect::<Vec<_>>().join(" ")
}
