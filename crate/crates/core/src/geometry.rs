//! Planar predicates in local coordinates.
//!
//! Orientation uses a static floating-point error bound: a sign is reported
//! only when the rounded determinant provably has that sign, otherwise the
//! answer is [`Orientation::Uncertain`]. Callers treat uncertainty
//! conservatively (not contained, not disjoint).

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
    Uncertain,
}

// (3 + 16ε)ε with ε = 2^-53
const CCW_ERR_BOUND: f64 = 3.330_669_073_875_471_6e-16;

/// Sign of `(b − a) × (c − a)`.
pub fn orient(a: Point, b: Point, c: Point) -> Orientation {
    let l = (a[0] - c[0]) * (b[1] - c[1]);
    let r = (a[1] - c[1]) * (b[0] - c[0]);
    let det = l - r;
    let bound = CCW_ERR_BOUND * (l.abs() + r.abs());
    if !det.is_finite() {
        Orientation::Uncertain
    } else if det > bound {
        Orientation::CounterClockwise
    } else if -det > bound {
        Orientation::Clockwise
    } else {
        Orientation::Uncertain
    }
}

/// Shoelace area (unsigned).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    s.abs() / 2.0
}

pub fn triangle_area(t: &[Point; 3]) -> f64 {
    polygon_area(t)
}

/// Convex hull by monotone chain, counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// The triangle's vertices in counter-clockwise order, or `None` if its
/// orientation cannot be decided.
fn ccw(t: &[Point; 3]) -> Option<[Point; 3]> {
    match orient(t[0], t[1], t[2]) {
        Orientation::CounterClockwise => Some(*t),
        Orientation::Clockwise => Some([t[0], t[2], t[1]]),
        Orientation::Uncertain => None,
    }
}

/// Is `p` certainly in the open interior of `t`?
pub fn point_strictly_inside(p: Point, t: &[Point; 3]) -> bool {
    let Some([a, b, c]) = ccw(t) else { return false };
    [(a, b), (b, c), (c, a)]
        .iter()
        .all(|&(u, v)| orient(u, v, p) == Orientation::CounterClockwise)
}

/// Every point certainly strictly inside `t` (so their hull is too).
pub fn polygon_in_triangle(poly: &[Point], t: &[Point; 3]) -> bool {
    !poly.is_empty() && poly.iter().all(|&p| point_strictly_inside(p, t))
}

/// Certified disjointness by a separating edge line. `false` means either
/// intersecting or undecided.
pub fn triangles_disjoint(a: &[Point; 3], b: &[Point; 3]) -> bool {
    separated_by_edges_of(a, b) || separated_by_edges_of(b, a)
}

fn separated_by_edges_of(t: &[Point; 3], other: &[Point; 3]) -> bool {
    let Some([p, q, r]) = ccw(t) else { return false };
    [(p, q), (q, r), (r, p)]
        .iter()
        .any(|&(u, v)| other.iter().all(|&x| orient(u, v, x) == Orientation::Clockwise))
}

/// First point where the ray `o + t·d` (`t > 0`) leaves the triangle, for
/// `o` inside it.
pub fn ray_exit(t: &[Point; 3], o: Point, d: Point) -> Option<Point> {
    let [p, q, r] = ccw(t)?;
    let mut best = f64::INFINITY;
    for (u, v) in [(p, q), (q, r), (r, p)] {
        // outward normal of a CCW edge
        let n = [v[1] - u[1], u[0] - v[0]];
        let nd = n[0] * d[0] + n[1] * d[1];
        if nd > 0.0 {
            let s = (n[0] * (u[0] - o[0]) + n[1] * (u[1] - o[1])) / nd;
            if s > 0.0 && s < best {
                best = s;
            }
        }
    }
    best.is_finite().then(|| [o[0] + best * d[0], o[1] + best * d[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pplane::REF_VERTICES;

    #[test]
    fn orientation_signs() {
        assert_eq!(orient([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]), Orientation::CounterClockwise);
        assert_eq!(orient([0.0, 0.0], [0.0, 1.0], [1.0, 0.0]), Orientation::Clockwise);
        assert_eq!(orient([0.0, 0.0], [1.0, 1.0], [2.0, 2.0]), Orientation::Uncertain);
        // nearly collinear, beyond double resolution
        let e = f64::EPSILON / 4.0;
        assert_eq!(orient([0.5, 0.5], [12.0, 12.0], [24.0, 24.0 + e]), Orientation::Uncertain);
    }

    #[test]
    fn hull_examples() {
        let t = REF_VERTICES;
        let mut h = convex_hull(&t);
        h.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = t.to_vec();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(h, want);

        let mut six = t.to_vec();
        six.extend([[0.0, 0.0], [0.1, 0.05], [-0.2, 0.1]]);
        let h6 = convex_hull(&six);
        assert_eq!(h6.len(), 3);
        assert!((polygon_area(&h6) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn containment() {
        let t = REF_VERTICES;
        assert!(point_strictly_inside([0.0, 0.0], &t));
        assert!(!point_strictly_inside([1.0, 0.0], &t));
        assert!(!point_strictly_inside([2.0, 0.0], &t));
        let small = [[-0.1, -0.1], [0.1, 0.0], [-0.1, 0.1]];
        assert!(polygon_in_triangle(&small, &t));
    }

    #[test]
    fn disjointness() {
        let t = REF_VERTICES;
        let far = [[5.0, 5.0], [6.0, 5.0], [5.0, 6.0]];
        assert!(triangles_disjoint(&t, &far));
        // shares the edge from Q to R
        let nb = [[1.0, 0.0], [0.0, 1.0], [-0.5, 0.5]];
        assert!(!triangles_disjoint(&t, &nb));
        assert!(!triangles_disjoint(&t, &t));
        // overlapping but not nested
        let shifted = t.map(|p| [p[0] + 0.5, p[1]]);
        assert!(!triangles_disjoint(&t, &shifted));
    }

    #[test]
    fn ray_exit_hits_boundary() {
        let t = REF_VERTICES;
        let hit = ray_exit(&t, [0.0, 0.0], [1.0, 0.0]).unwrap();
        assert!((hit[0] - 1.0).abs() < 1e-15 && hit[1].abs() < 1e-15);
        let hit = ray_exit(&t, [0.0, 0.0], [-1.0, 0.0]).unwrap();
        assert!((hit[0] + 0.5).abs() < 1e-15);
        for k in 0..32 {
            let a = k as f64 * std::f64::consts::TAU / 32.0;
            let h = ray_exit(&t, [0.0, 0.0], [a.cos(), a.sin()]).unwrap();
            // on the boundary: one edge orientation vanishes to rounding
            let bary_min = [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                .iter()
                .map(|&(u, v)| ((v[0] - u[0]) * (h[1] - u[1]) - (v[1] - u[1]) * (h[0] - u[0])).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(bary_min < 1e-14);
        }
    }
}
