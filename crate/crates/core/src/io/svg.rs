//! Poincare disk drawings. Output depends only on the element list: fixed
//! canvas, fixed decimal formatting, elements in insertion order.

use crate::error::Result;
use crate::lorentz::HPoint;
use std::fmt::Write as _;
use std::path::Path;

const SIZE: f64 = 800.0;
const SCALE: f64 = 380.0;

/// Geodesic through two disk points: a diameter or a circle orthogonal to the
/// unit circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arc {
    Line,
    Circle { center: (f64, f64), radius: f64 },
}

pub fn geodesic_arc(p: (f64, f64), q: (f64, f64)) -> Arc {
    // The center c solves 2 c.p = 1 + |p|^2 and 2 c.q = 1 + |q|^2; the system
    // is singular exactly when p, q and the origin are collinear.
    let det = p.0 * q.1 - p.1 * q.0;
    let scale = (p.0.hypot(p.1) * q.0.hypot(q.1)).max(1e-300);
    if det.abs() <= 1e-9 * scale {
        return Arc::Line;
    }
    let rp = 0.5 * (1.0 + p.0 * p.0 + p.1 * p.1);
    let rq = 0.5 * (1.0 + q.0 * q.0 + q.1 * q.1);
    let c = ((rp * q.1 - rq * p.1) / det, (p.0 * rq - q.0 * rp) / det);
    let radius = (c.0 - p.0).hypot(c.1 - p.1);
    Arc::Circle { center: c, radius }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    /// The geodesic segment between two disk points (closed unit disk).
    Geodesic { a: (f64, f64), b: (f64, f64), class: &'static str },
    Polyline { points: Vec<(f64, f64)>, closed: bool, class: &'static str },
    Dot { at: (f64, f64), class: &'static str },
}

impl Element {
    pub fn geodesic(p: HPoint, q: HPoint, class: &'static str) -> Self {
        Element::Geodesic { a: p.to_disk(), b: q.to_disk(), class }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Drawing {
    pub title: String,
    pub elements: Vec<Element>,
}

fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn screen(p: (f64, f64)) -> (f64, f64) {
    (0.5 * SIZE + SCALE * p.0, 0.5 * SIZE - SCALE * p.1)
}

fn path_geodesic(a: (f64, f64), b: (f64, f64)) -> String {
    let (sa, sb) = (screen(a), screen(b));
    let head = format!("M {} {}", num(sa.0), num(sa.1));
    match geodesic_arc(a, b) {
        Arc::Line => format!("{head} L {} {}", num(sb.0), num(sb.1)),
        Arc::Circle { center, radius } => {
            let c = screen(center);
            // Screen coordinates flip y, so the short arc is traced with
            // increasing screen angle exactly when this cross product is positive.
            let cross = (sa.0 - c.0) * (sb.1 - c.1) - (sa.1 - c.1) * (sb.0 - c.0);
            let sweep = u8::from(cross > 0.0);
            let r = num(SCALE * radius);
            format!("{head} A {r} {r} 0 0 {sweep} {} {}", num(sb.0), num(sb.1))
        }
    }
}

pub fn render(d: &Drawing) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        SIZE
    );
    let _ = writeln!(s, "<title>{}</title>", d.title.replace('&', "&amp;").replace('<', "&lt;"));
    s.push_str(
        "<style>path,polyline,polygon{fill:none;stroke-width:1}.disk{stroke:#000}.face{stroke:#1f5fa8}\
         .rim{stroke:#888;stroke-dasharray:4 3}.tight{stroke:#c0392b;stroke-opacity:0.6}.dot{fill:#000}</style>\n",
    );
    let _ = writeln!(
        s,
        r#"<circle class="disk" cx="{0}" cy="{0}" r="{1}" fill="none" stroke="black"/>"#,
        num(0.5 * SIZE),
        num(SCALE)
    );
    for e in &d.elements {
        match e {
            Element::Geodesic { a, b, class } => {
                let _ = writeln!(s, r#"<path class="{class}" d="{}"/>"#, path_geodesic(*a, *b));
            }
            Element::Polyline { points, closed, class } => {
                let pts: Vec<String> = points
                    .iter()
                    .map(|p| {
                        let q = screen(*p);
                        format!("{},{}", num(q.0), num(q.1))
                    })
                    .collect();
                let tag = if *closed { "polygon" } else { "polyline" };
                let _ = writeln!(s, r#"<{tag} class="{class}" points="{}"/>"#, pts.join(" "));
            }
            Element::Dot { at, class } => {
                let q = screen(*at);
                let _ = writeln!(s, r#"<circle class="{class}" cx="{}" cy="{}" r="2"/>"#, num(q.0), num(q.1));
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_svg(d: &Drawing, path: &Path) -> Result<()> {
    std::fs::write(path, render(d))?;
    Ok(())
}
