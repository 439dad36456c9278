//! Heuristic oracles: intersection norm, linear approximation, Newton and
//! one-step gradient descent. Any evaluation failure makes the oracle pass.

use super::{frobenius_norm, spectral_norm, GdStepRule, JacobianNorm, NewtonVariant, Oracle, OracleConfig, Verdict};
use crate::geometry::{convex_hull, polygon_area, polygon_in_triangle, ray_exit, triangle_area, triangles_disjoint, Point};
use crate::mastermap::{Mat2, MasterMap, NonEvaluable, Stage};
use crate::pplane::{Side, REF_VERTICES};

/// `z ↦ (F(z), J(z))`.
pub trait FieldEval {
    fn eval(&self, z: Point) -> Result<([f64; 2], Mat2), NonEvaluable>;
}

impl<F: Fn(Point) -> Result<([f64; 2], Mat2), NonEvaluable>> FieldEval for F {
    fn eval(&self, z: Point) -> Result<([f64; 2], Mat2), NonEvaluable> {
        self(z)
    }
}

impl FieldEval for MasterMap<'_> {
    fn eval(&self, z: Point) -> Result<([f64; 2], Mat2), NonEvaluable> {
        self.eval_with_jacobian(z)
    }
}

const ORIGIN: Point = [0.0, 0.0];

fn ref_area() -> f64 {
    triangle_area(&REF_VERTICES)
}

fn norm2(v: Point) -> f64 {
    v[0].hypot(v[1])
}

/// `J⁻¹ b`, refusing `|det J| ≤ 1e-14·‖J‖²`.
pub fn solve2(j: &Mat2, b: [f64; 2], stage: Stage) -> Result<[f64; 2], NonEvaluable> {
    let [[a, c], [d, e]] = *j;
    let det = a * e - c * d;
    let scale = frobenius_norm(j).powi(2);
    if !(det.abs() > 1e-14 * scale) || !det.is_finite() {
        return Err(NonEvaluable::new(stage, "singular Jacobian"));
    }
    Ok([(e * b[0] - c * b[1]) / det, (a * b[1] - d * b[0]) / det])
}

/// `z − J_z⁻¹ F(z)`.
pub fn newton_step(f: &impl FieldEval, z: Point) -> Result<Point, NonEvaluable> {
    let (v, j) = f.eval(z)?;
    let s = solve2(&j, v, Stage::Newton)?;
    Ok([z[0] - s[0], z[1] - s[1]])
}

/// Newton images of the reference vertices (and side midpoints for the
/// hull variant).
pub fn newton_images(f: &impl FieldEval, variant: NewtonVariant) -> Result<Vec<Point>, NonEvaluable> {
    let mut pts: Vec<Point> = REF_VERTICES.to_vec();
    if variant == NewtonVariant::SixPointHull {
        pts.extend(Side::ALL.iter().map(|s| s.local_midpoint_and_vector().0));
    }
    pts.into_iter().map(|p| newton_step(f, p)).collect()
}

pub fn newton_verdict(f: &impl FieldEval, variant: NewtonVariant, c_area: f64) -> Verdict {
    let Ok(img) = newton_images(f, variant) else { return Verdict::Pass };
    let area = match variant {
        NewtonVariant::ThreeVertex => polygon_area(&img),
        NewtonVariant::SixPointHull => polygon_area(&convex_hull(&img)),
    };
    if polygon_in_triangle(&img, &REF_VERTICES) && area <= c_area * ref_area() {
        Verdict::Accept
    } else {
        Verdict::Pass
    }
}

fn gradient(v: [f64; 2], j: &Mat2) -> Point {
    // ∇‖F‖² = 2 Jᵀ F
    [2.0 * (j[0][0] * v[0] + j[1][0] * v[1]), 2.0 * (j[0][1] * v[0] + j[1][1] * v[1])]
}

fn grad_at(f: &impl FieldEval, z: Point) -> Result<Point, NonEvaluable> {
    let (v, j) = f.eval(z)?;
    let g = gradient(v, &j);
    if g.iter().all(|x| x.is_finite()) {
        Ok(g)
    } else {
        Err(NonEvaluable::new(Stage::GradientStep, "non-finite gradient"))
    }
}

/// Barzilai–Borwein rate `|sᵀΔ| / ‖Δ‖²` for displacement `s` and gradient
/// change `Δ`.
fn bb_rate(s: Point, g0: Point, g1: Point) -> Result<f64, NonEvaluable> {
    let d = [g1[0] - g0[0], g1[1] - g0[1]];
    let dd = d[0] * d[0] + d[1] * d[1];
    if !(norm2(d) > 1e-14 * (norm2(g0) + norm2(g1))) {
        return Err(NonEvaluable::new(Stage::GradientStep, "gradient does not change"));
    }
    Ok((s[0] * d[0] + s[1] * d[1]).abs() / dd)
}

/// Learning rate from the centre `O`, the exit point `T` of the ray along
/// `∇g(O)`, and the midpoint `M` of `OT`.
pub fn centre_rate(f: &impl FieldEval) -> Result<f64, NonEvaluable> {
    let g0 = grad_at(f, ORIGIN)?;
    if g0 == [0.0, 0.0] {
        return Err(NonEvaluable::new(Stage::GradientStep, "zero gradient at centre"));
    }
    let t = ray_exit(&REF_VERTICES, ORIGIN, g0)
        .ok_or(NonEvaluable::new(Stage::GradientStep, "ray misses boundary"))?;
    let m = [t[0] / 2.0, t[1] / 2.0];
    let gm = grad_at(f, m)?;
    bb_rate(m, g0, gm)
}

/// `z − γ ∇g(z)` with `g = ‖F‖²`.
pub fn gd_step(f: &impl FieldEval, gamma: f64, z: Point) -> Result<Point, NonEvaluable> {
    let g = grad_at(f, z)?;
    Ok([z[0] - gamma * g[0], z[1] - gamma * g[1]])
}

/// Images of the reference vertices under one gradient-descent step.
pub fn gd_images(f: &impl FieldEval, rule: GdStepRule) -> Result<[Point; 3], NonEvaluable> {
    match rule {
        GdStepRule::PerTriangle => {
            let gamma = centre_rate(f)?;
            let mut out = [ORIGIN; 3];
            for (o, v) in out.iter_mut().zip(REF_VERTICES) {
                *o = gd_step(f, gamma, v)?;
            }
            Ok(out)
        }
        GdStepRule::PerVertex => {
            let g0 = grad_at(f, ORIGIN)?;
            let mut out = [ORIGIN; 3];
            for (o, v) in out.iter_mut().zip(REF_VERTICES) {
                let gv = grad_at(f, v)?;
                let gamma = bb_rate(v, g0, gv)?;
                *o = [v[0] - gamma * gv[0], v[1] - gamma * gv[1]];
            }
            Ok(out)
        }
    }
}

pub fn gd_disjoint_verdict(f: &impl FieldEval, rule: GdStepRule) -> Verdict {
    match gd_images(f, rule) {
        Ok(img) if triangles_disjoint(&img, &REF_VERTICES) => Verdict::Reject,
        _ => Verdict::Pass,
    }
}

pub fn gd_converge_verdict(f: &impl FieldEval, rule: GdStepRule, c_area: f64) -> Verdict {
    match gd_images(f, rule) {
        Ok(img) if polygon_in_triangle(&img, &REF_VERTICES) && triangle_area(&img) <= c_area * ref_area() => {
            Verdict::Accept
        }
        _ => Verdict::Pass,
    }
}

pub fn linear_verdict(f: &impl FieldEval, norm: JacobianNorm, c_safety: f64) -> Verdict {
    let Ok((v, j)) = f.eval(ORIGIN) else { return Verdict::Pass };
    let jn = match norm {
        JacobianNorm::Spectral => spectral_norm(&j),
        JacobianNorm::Frobenius => frobenius_norm(&j),
    };
    if norm2(v) - c_safety * jn > 0.0 {
        Verdict::Reject
    } else {
        Verdict::Pass
    }
}

/// Rejects when some line of sight meets the plane of the centre normal
/// farther out than `c_max_int_norm`.
pub struct Intersection;

impl Oracle for Intersection {
    fn name(&self) -> &'static str {
        "intersection"
    }

    fn label(&self, map: &MasterMap<'_>, cfg: &OracleConfig) -> Verdict {
        match map.intersection_norms(ORIGIN) {
            Ok(n) if n.iter().any(|&r| r > cfg.c_max_int_norm) => Verdict::Reject,
            _ => Verdict::Pass,
        }
    }
}

/// Rejects when the first-order Taylor model about the centre cannot reach
/// zero: `‖F(0)‖ − C_safety ‖J(0)‖ > 0`.
pub struct LinearApproximation;

impl Oracle for LinearApproximation {
    fn name(&self) -> &'static str {
        "linear_approximation"
    }

    fn label(&self, map: &MasterMap<'_>, cfg: &OracleConfig) -> Verdict {
        linear_verdict(map, cfg.jacobian_norm, cfg.c_safety)
    }
}

/// Accepts when one Newton step shrinks the triangle into itself.
pub struct Newton;

impl Oracle for Newton {
    fn name(&self) -> &'static str {
        "newton"
    }

    fn label(&self, map: &MasterMap<'_>, cfg: &OracleConfig) -> Verdict {
        newton_verdict(map, cfg.newton_variant, cfg.c_area_scaling)
    }
}

/// Rejects when one gradient step on `‖F‖²` moves the triangle off itself.
pub struct GdDisjoint;

impl Oracle for GdDisjoint {
    fn name(&self) -> &'static str {
        "gd_disjoint"
    }

    fn label(&self, map: &MasterMap<'_>, cfg: &OracleConfig) -> Verdict {
        gd_disjoint_verdict(map, cfg.gd_step)
    }
}

/// Accepts when one gradient step shrinks the triangle into itself.
pub struct GdConverge;

impl Oracle for GdConverge {
    fn name(&self) -> &'static str {
        "gd_converge"
    }

    fn label(&self, map: &MasterMap<'_>, cfg: &OracleConfig) -> Verdict {
        gd_converge_verdict(map, cfg.gd_step, cfg.c_area_scaling)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(a: Mat2, zs: Point) -> impl Fn(Point) -> Result<([f64; 2], Mat2), NonEvaluable> {
        move |z| {
            let d = [z[0] - zs[0], z[1] - zs[1]];
            Ok(([a[0][0] * d[0] + a[0][1] * d[1], a[1][0] * d[0] + a[1][1] * d[1]], a))
        }
    }

    #[test]
    fn newton_step_examples() {
        let f = linear([[2.0, 1.0], [-1.0, 3.0]], [0.1, -0.2]);
        let z = newton_step(&f, [5.0, 7.0]).unwrap();
        assert!((z[0] - 0.1).abs() < 1e-14 && (z[1] + 0.2).abs() < 1e-14);
        assert_eq!(newton_step(&f, [0.1, -0.2]).unwrap(), [0.1, -0.2]);
        let sing = linear([[1.0, 2.0], [2.0, 4.0]], [0.0, 0.0]);
        assert_eq!(newton_step(&sing, [1.0, 1.0]).unwrap_err().stage, Stage::Newton);
    }

    #[test]
    fn newton_oracle_on_linear_maps() {
        let inside = linear([[2.0, 1.0], [-1.0, 3.0]], [0.1, 0.05]);
        for v in [NewtonVariant::ThreeVertex, NewtonVariant::SixPointHull] {
            assert_eq!(newton_verdict(&inside, v, 0.9), Verdict::Accept);
        }
        let outside = linear([[2.0, 1.0], [-1.0, 3.0]], [3.0, 0.0]);
        assert_eq!(newton_verdict(&outside, NewtonVariant::ThreeVertex, 0.9), Verdict::Pass);
    }

    #[test]
    fn isotropic_quadratic_gd() {
        // F(z) = z − z*: g = ‖z − z*‖², ∇g = 2(z − z*), BB rate 1/2.
        let zs = [0.2, -0.1];
        let f = linear([[1.0, 0.0], [0.0, 1.0]], zs);
        let gamma = centre_rate(&f).unwrap();
        assert!((gamma - 0.5).abs() < 1e-15);
        for v in REF_VERTICES {
            let z = gd_step(&f, gamma, v).unwrap();
            assert!((z[0] - zs[0]).abs() < 1e-15 && (z[1] - zs[1]).abs() < 1e-15);
        }
        assert_eq!(gd_converge_verdict(&f, GdStepRule::PerTriangle, 0.9), Verdict::Accept);
        assert_eq!(gd_converge_verdict(&f, GdStepRule::PerVertex, 0.9), Verdict::Accept);
        assert_eq!(gd_disjoint_verdict(&f, GdStepRule::PerTriangle), Verdict::Pass);
    }

    #[test]
    fn gd_moves_far_triangle_away() {
        let f = linear([[1.0, 0.0], [0.0, 1.0]], [6.0, 4.0]);
        assert_eq!(gd_disjoint_verdict(&f, GdStepRule::PerTriangle), Verdict::Reject);
        assert_eq!(gd_converge_verdict(&f, GdStepRule::PerTriangle, 0.9), Verdict::Pass);
    }

    #[test]
    fn gd_zero_gradient_at_centre_passes() {
        let f = linear([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]);
        assert!(centre_rate(&f).is_err());
        assert_eq!(gd_disjoint_verdict(&f, GdStepRule::PerTriangle), Verdict::Pass);
    }

    #[test]
    fn linear_approximation_examples() {
        // ‖F(0)‖ = 5, ‖J‖ = 1
        let f = |_: Point| Ok(([3.0, 4.0], [[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!(linear_verdict(&f, JacobianNorm::Spectral, 1.0), Verdict::Reject);
        assert_eq!(linear_verdict(&f, JacobianNorm::Spectral, 6.0), Verdict::Pass);
        let zero = linear([[1.0, 5.0], [0.0, 1.0]], [0.0, 0.0]);
        assert_eq!(linear_verdict(&zero, JacobianNorm::Spectral, 0.0), Verdict::Pass);
        let broken = |_: Point| Err(NonEvaluable::new(Stage::Intersect, "x"));
        assert_eq!(linear_verdict(&broken, JacobianNorm::Spectral, 1.0), Verdict::Pass);
    }
}
