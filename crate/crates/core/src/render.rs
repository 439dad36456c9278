//! SVG top view of a triangulation: the northern faces projected onto the
//! diamond `|x| + |y| ≤ 1`.

use std::fmt::Write;

use crate::engine::Status;
use crate::pplane::{octahedron_point, Triangle};

const SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;

fn px(x: f64, y: f64) -> (f64, f64) {
    let s = (SIZE - 2.0 * MARGIN) / 2.0;
    (MARGIN + (x + 1.0) * s, MARGIN + (1.0 - y) * s)
}

fn class(s: Status) -> &'static str {
    match s {
        Status::Accepted => "accepted",
        Status::Rejected => "rejected",
        Status::Unresolved => "unresolved",
    }
}

/// Renders leaves in the given order, then polished solutions as crosses
/// and known solutions as red dots.
pub fn render_svg<'a>(
    leaves: impl IntoIterator<Item = (&'a Triangle, Status)>,
    solutions: &[[f64; 3]],
    known: &[[f64; 3]],
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    out.push_str(
        "<style>\
         polygon{stroke:#000;stroke-width:0.3}\
         .rejected{fill:#fff}\
         .unresolved{fill:#3a6fd8}\
         .accepted{fill:#d83a3a;fill-opacity:0.6}\
         .known{fill:#e00000}\
         .solution{stroke:#000;stroke-width:1.5}\
         </style>\n",
    );
    out.push_str("<g id=\"triangles\">\n");
    for (t, s) in leaves {
        let pts: Vec<String> = t
            .positions()
            .iter()
            .map(|p| {
                let (x, y) = px(p[0], p[1]);
                format!("{x:.4},{y:.4}")
            })
            .collect();
        let _ = writeln!(out, r#"<polygon class="{}" points="{}"/>"#, class(s), pts.join(" "));
    }
    out.push_str("</g>\n<g id=\"solutions\">\n");
    for w in solutions.iter().filter_map(|w| octahedron_point(*w)) {
        let (x, y) = px(w[0], w[1]);
        let d = 5.0;
        let _ = writeln!(
            out,
            r#"<path class="solution" d="M{:.4},{:.4}L{:.4},{:.4}M{:.4},{:.4}L{:.4},{:.4}"/>"#,
            x - d,
            y - d,
            x + d,
            y + d,
            x - d,
            y + d,
            x + d,
            y - d
        );
    }
    out.push_str("</g>\n<g id=\"known\">\n");
    for w in known.iter().filter_map(|w| octahedron_point(*w)) {
        let (x, y) = px(w[0], w[1]);
        let _ = writeln!(out, r#"<circle class="known" cx="{x:.4}" cy="{y:.4}" r="3"/>"#);
    }
    out.push_str("</g>\n</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pplane::initial_triangulation;

    #[test]
    fn initial_triangulation_is_a_diamond() {
        let ts = initial_triangulation();
        let svg = render_svg(ts.iter().map(|t| (t, Status::Unresolved)), &[], &[]);
        assert_eq!(svg.matches("<polygon").count(), 4);
        for corner in ["780.0000,400.0000", "20.0000,400.0000", "400.0000,20.0000", "400.0000,780.0000"] {
            assert!(svg.contains(corner), "{corner}");
        }
    }

    #[test]
    fn one_red_polygon_per_accepted_triangle() {
        let ts = initial_triangulation();
        let st = [Status::Accepted, Status::Rejected, Status::Accepted, Status::Unresolved];
        let svg = render_svg(ts.iter().zip(st), &[], &[[0.1, 0.2, 0.9]]);
        assert_eq!(svg.matches(r#"class="accepted""#).count(), 2);
        assert_eq!(svg.matches(r#"class="known""#).count(), 1);
        assert_eq!(svg, render_svg(ts.iter().zip(st), &[], &[[0.1, 0.2, 0.9]]));
    }
}
