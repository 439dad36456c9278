//! The real projective plane as the four northern faces of the octahedron
//! `|x| + |y| + |z| = 1`, with antipodal points identified.
//!
//! Triangles carry exact [`DyadicPoint`] vertices; floating point enters only
//! through [`LocalFrame`], the affine parametrization used by the master map.

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicPoint;
use crate::scalar::{cross, dot, norm, sub3};

/// Reference triangle in local coordinates: `P`, `Q`, `R`. Its vertex
/// centroid is the local origin.
pub const REF_P: [f64; 2] = [-0.5, -0.5];
pub const REF_Q: [f64; 2] = [1.0, 0.0];
pub const REF_R: [f64; 2] = [-0.5, 0.5];
pub const REF_VERTICES: [[f64; 2]; 3] = [REF_P, REF_Q, REF_R];

/// Total flat area of the four northern faces, `4 · √3/2`.
pub const TOTAL_AREA: f64 = 3.464_101_615_137_754_6;

/// One of the four northern octahedron faces, keyed by the signs of `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Face {
    PosPos,
    NegPos,
    NegNeg,
    PosNeg,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::PosPos, Face::NegPos, Face::NegNeg, Face::PosNeg];

    pub fn signs(self) -> (f64, f64) {
        match self {
            Face::PosPos => (1.0, 1.0),
            Face::NegPos => (-1.0, 1.0),
            Face::NegNeg => (-1.0, -1.0),
            Face::PosNeg => (1.0, -1.0),
        }
    }

    /// Counter-clockwise (seen from +z) corner vertices.
    fn corners(self) -> [DyadicPoint; 3] {
        let e3 = DyadicPoint::unit(2, 1);
        match self {
            Face::PosPos => [DyadicPoint::unit(0, 1), DyadicPoint::unit(1, 1), e3],
            Face::NegPos => [DyadicPoint::unit(1, 1), DyadicPoint::unit(0, -1), e3],
            Face::NegNeg => [DyadicPoint::unit(0, -1), DyadicPoint::unit(1, -1), e3],
            Face::PosNeg => [DyadicPoint::unit(1, -1), DyadicPoint::unit(0, 1), e3],
        }
    }

    /// Does the sign pattern of `p` allow it to lie on this face?
    pub fn admits(self, p: &DyadicPoint) -> bool {
        let (sx, sy) = self.signs();
        let ok = |axis: usize, s: f64| {
            let c = p.coord_sign(axis);
            c == 0 || (c as f64) == s
        };
        ok(0, sx) && ok(1, sy) && p.is_northern()
    }
}

/// Which side of a triangle: `V1V2`, `V2V3`, or `V3V1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    S12,
    S23,
    S31,
}

impl Side {
    pub const ALL: [Side; 3] = [Side::S12, Side::S23, Side::S31];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Endpoint vertex indices.
    pub fn ends(self) -> (usize, usize) {
        match self {
            Side::S12 => (0, 1),
            Side::S23 => (1, 2),
            Side::S31 => (2, 0),
        }
    }

    /// Midpoint and side vector in local coordinates.
    pub fn local_midpoint_and_vector(self) -> ([f64; 2], [f64; 2]) {
        let (a, b) = self.ends();
        let (pa, pb) = (REF_VERTICES[a], REF_VERTICES[b]);
        (
            [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0],
            [pb[0] - pa[0], pb[1] - pa[1]],
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Triangle {
    vertices: [DyadicPoint; 3],
    face: Face,
    generation: u32,
    pos: [[f64; 3]; 3],
}

#[derive(Debug, thiserror::Error)]
pub enum TriangleError {
    #[error("vertex {0} is not on the octahedron")]
    OffSurface(DyadicPoint),
    #[error("vertex {0} does not lie on face {1:?}")]
    WrongFace(DyadicPoint, Face),
    #[error("degenerate triangle")]
    Degenerate,
}

impl Triangle {
    pub fn new(vertices: [DyadicPoint; 3], face: Face, generation: u32) -> Result<Self, TriangleError> {
        for v in &vertices {
            if !v.on_octahedron() {
                return Err(TriangleError::OffSurface(v.clone()));
            }
            if !face.admits(v) {
                return Err(TriangleError::WrongFace(v.clone(), face));
            }
        }
        let t = Self::unchecked(vertices, face, generation);
        if t.area() <= 0.0 {
            return Err(TriangleError::Degenerate);
        }
        Ok(t)
    }

    fn unchecked(vertices: [DyadicPoint; 3], face: Face, generation: u32) -> Self {
        let pos = [vertices[0].to_f64(), vertices[1].to_f64(), vertices[2].to_f64()];
        Self { vertices, face, generation, pos }
    }

    pub fn vertices(&self) -> &[DyadicPoint; 3] {
        &self.vertices
    }

    pub fn face(&self) -> Face {
        self.face
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    /// Vertex positions as floats.
    pub fn positions(&self) -> &[[f64; 3]; 3] {
        &self.pos
    }

    pub fn centroid(&self) -> [f64; 3] {
        let p = &self.pos;
        [0, 1, 2].map(|k| (p[0][k] + p[1][k] + p[2][k]) / 3.0)
    }

    /// Flat (within-face) area.
    pub fn area(&self) -> f64 {
        triangle_area(&self.pos)
    }

    pub fn circumradius(&self) -> f64 {
        let p = &self.pos;
        let a = norm(&sub3(&p[1], &p[2]));
        let b = norm(&sub3(&p[2], &p[0]));
        let c = norm(&sub3(&p[0], &p[1]));
        let area = self.area();
        if area == 0.0 {
            return f64::INFINITY;
        }
        a * b * c / (4.0 * area)
    }

    pub fn local_frame(&self) -> LocalFrame {
        LocalFrame::new(&self.pos)
    }

    /// Midpoint split into four; the centre child is listed last.
    pub fn regular_subdivide(&self) -> [Triangle; 4] {
        let [v1, v2, v3] = &self.vertices;
        let m12 = DyadicPoint::midpoint(v1, v2);
        let m23 = DyadicPoint::midpoint(v2, v3);
        let m31 = DyadicPoint::midpoint(v3, v1);
        let g = self.generation + 1;
        let mk = |a: &DyadicPoint, b: &DyadicPoint, c: &DyadicPoint| {
            Triangle::unchecked([a.clone(), b.clone(), c.clone()], self.face, g)
        };
        [
            mk(v1, &m12, &m31),
            mk(&m12, v2, &m23),
            mk(&m31, &m23, v3),
            mk(&m12, &m23, &m31),
        ]
    }

    /// Joins the midpoint of `side` to the opposite vertex.
    pub fn bisect(&self, side: Side) -> [Triangle; 2] {
        let (a, b) = side.ends();
        let m = DyadicPoint::midpoint(&self.vertices[a], &self.vertices[b]);
        let g = self.generation + 1;
        // Replace one endpoint of the side by the midpoint in each child so
        // both keep the parent's orientation.
        let mut first = self.vertices.clone();
        first[b] = m.clone();
        let mut second = self.vertices.clone();
        second[a] = m;
        [
            Triangle::unchecked(first, self.face, g),
            Triangle::unchecked(second, self.face, g),
        ]
    }

    /// Where the line through the origin along `w` meets the triangle's
    /// plane.
    pub fn plane_point(&self, w: [f64; 3]) -> Option<[f64; 3]> {
        let p = &self.pos;
        let n = cross(&sub3(&p[1], &p[0]), &sub3(&p[2], &p[0]));
        let den = dot(&n, &w);
        let t = dot(&n, &p[0]) / den;
        let q = w.map(|x| x * t);
        q.iter().all(|x| x.is_finite()).then_some(q)
    }

    /// Is the direction `w` (or `-w`) inside this triangle, up to `tol` in
    /// barycentric coordinates?
    pub fn contains_direction(&self, w: [f64; 3], tol: f64) -> bool {
        match self.plane_point(w) {
            Some(q) => self.barycentric(&q).iter().all(|&x| x >= -tol),
            None => false,
        }
    }

    /// Barycentric coordinates of a point in the face plane.
    pub fn barycentric(&self, q: &[f64; 3]) -> [f64; 3] {
        let p = &self.pos;
        let n = cross(&sub3(&p[1], &p[0]), &sub3(&p[2], &p[0]));
        let nn = dot(&n, &n);
        let sub = |i: usize, j: usize| {
            let c = cross(&sub3(&p[j], &p[i]), &sub3(q, &p[i]));
            dot(&c, &n) / nn
        };
        // weight of vertex k = area of the sub-triangle opposite k
        [sub(1, 2), sub(2, 0), sub(0, 1)]
    }

    /// Distance from a point in the face plane to the closed triangle.
    pub fn distance_to(&self, q: &[f64; 3]) -> f64 {
        let b = self.barycentric(q);
        if b.iter().all(|&x| x >= 0.0) {
            return 0.0;
        }
        Side::ALL
            .iter()
            .map(|s| {
                let (i, j) = s.ends();
                segment_distance(q, &self.pos[i], &self.pos[j])
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(q: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let ab = sub3(b, a);
    let t = (dot(&sub3(q, a), &ab) / dot(&ab, &ab)).clamp(0.0, 1.0);
    let proj = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]];
    norm(&sub3(q, &proj))
}

/// `‖(v2 − v1) × (v3 − v1)‖ / 2`.
pub fn triangle_area(p: &[[f64; 3]; 3]) -> f64 {
    norm(&cross(&sub3(&p[1], &p[0]), &sub3(&p[2], &p[0]))) / 2.0
}

/// The four northern faces at generation 0.
pub fn initial_triangulation() -> Vec<Triangle> {
    Face::ALL
        .iter()
        .map(|&f| Triangle::unchecked(f.corners(), f, 0))
        .collect()
}

/// Canonical representative of `±w` on the unit sphere: `z > 0`, or for
/// `z = 0` the first nonzero coordinate positive.
pub fn canonicalize(w: [f64; 3]) -> [f64; 3] {
    let n = norm(&w);
    let mut u = w.map(|x| x / n);
    let flip = if u[2] != 0.0 {
        u[2] < 0.0
    } else if u[0] != 0.0 {
        u[0] < 0.0
    } else {
        u[1] < 0.0
    };
    if flip {
        u = u.map(|x| -x);
    }
    u.map(|x| if x == 0.0 { 0.0 } else { x })
}

/// Radial projection of `±w` onto the northern octahedron surface.
pub fn octahedron_point(w: [f64; 3]) -> Option<[f64; 3]> {
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    if !(l1 > 0.0) || !l1.is_finite() {
        return None;
    }
    let s = if w[2] < 0.0 { -1.0 } else { 1.0 };
    Some(w.map(|x| s * x / l1))
}

/// Angle between two projective directions (sign-insensitive), in radians.
pub fn angular_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = (dot(&a, &b) / (norm(&a) * norm(&b))).abs().min(1.0);
    let s = norm(&cross(&a, &b)) / (norm(&a) * norm(&b));
    s.atan2(c)
}

/// Affine map from local coordinates onto the triangle's plane, taking the
/// reference vertices `P`, `Q`, `R` to `v1`, `v2`, `v3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFrame {
    pub origin: [f64; 3],
    pub axis_x: [f64; 3],
    pub axis_y: [f64; 3],
}

impl LocalFrame {
    pub fn new(v: &[[f64; 3]; 3]) -> Self {
        let origin = [0, 1, 2].map(|k| (v[0][k] + v[1][k] + v[2][k]) / 3.0);
        // From A(Q) − A(P) = 1.5·x + 0.5·y and A(R) − A(P) = y.
        let axis_y = sub3(&v[2], &v[0]);
        let axis_x = [0, 1, 2].map(|k| (2.0 * v[1][k] - v[2][k] - v[0][k]) / 3.0);
        Self { origin, axis_x, axis_y }
    }

    pub fn apply(&self, z: [f64; 2]) -> [f64; 3] {
        [0, 1, 2].map(|k| self.origin[k] + z[0] * self.axis_x[k] + z[1] * self.axis_y[k])
    }

    /// Least-squares preimage of a point in the plane.
    pub fn inverse(&self, q: [f64; 3]) -> Option<[f64; 2]> {
        let d = sub3(&q, &self.origin);
        let (a, b, c) = (
            dot(&self.axis_x, &self.axis_x),
            dot(&self.axis_x, &self.axis_y),
            dot(&self.axis_y, &self.axis_y),
        );
        let det = a * c - b * b;
        if det.abs() <= f64::EPSILON * a * c {
            return None;
        }
        let (r0, r1) = (dot(&self.axis_x, &d), dot(&self.axis_y, &d));
        Some([(c * r0 - b * r1) / det, (a * r1 - b * r0) / det])
    }

    /// `[axis_x axis_y]` as a 3×2 Jacobian.
    pub fn jacobian(&self) -> [[f64; 2]; 3] {
        [0, 1, 2].map(|k| [self.axis_x[k], self.axis_y[k]])
    }

    /// Local coordinates of the preimage of the ray through `w`, if the ray
    /// meets the triangle's plane on the positive side.
    pub fn preimage_of_direction(&self, w: [f64; 3]) -> Option<[f64; 2]> {
        let n = cross(&self.axis_x, &self.axis_y);
        let denom = dot(&n, &w);
        if denom.abs() < 1e-300 {
            return None;
        }
        let t = dot(&n, &self.origin) / denom;
        let q = w.map(|x| x * t);
        self.inverse(q)
    }
}
