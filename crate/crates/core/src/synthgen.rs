//! Synthetic scenarios with known plane normals.
//!
//! A single-ellipse scenario puts five observers around one focal ellipse
//! and aims each line of sight at a point of the orbit. A two-ellipse
//! scenario draws each line through corresponding points of two ellipses
//! that share a focus, so both plane normals are zeros of `F`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::mastermap::{Scenario, ScenarioError};
use crate::pplane::canonicalize;
use crate::scalar::{dot, norm, sub3};

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("invalid ellipse: {0}")]
    InvalidEllipse(&'static str),
    #[error("line of sight {0} is degenerate")]
    DegenerateLine(usize),
    #[error("no admissible configuration after {0} attempts")]
    Exhausted(usize),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Ellipse with a focus at the origin, periapsis on `+x`, in the `z = 0`
/// plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipseSpec {
    pub a: f64,
    pub ecc: f64,
    /// Eccentric anomalies of the five sample points.
    pub betas: [f64; 5],
}

impl EllipseSpec {
    pub fn new(a: f64, ecc: f64, betas: [f64; 5]) -> Result<Self, GenError> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(GenError::InvalidEllipse("semi-major axis must be positive"));
        }
        if !(0.0..1.0).contains(&ecc) {
            return Err(GenError::InvalidEllipse("eccentricity must lie in [0, 1)"));
        }
        if betas.iter().any(|b| !b.is_finite()) {
            return Err(GenError::InvalidEllipse("non-finite angle"));
        }
        for i in 0..5 {
            for j in 0..i {
                if circular_gap(betas[i], betas[j]) < 1e-9 {
                    return Err(GenError::InvalidEllipse("angles must be distinct"));
                }
            }
        }
        Ok(Self { a, ecc, betas })
    }

    pub fn c(&self) -> f64 {
        self.a * self.ecc
    }

    pub fn b(&self) -> f64 {
        let c = self.c();
        (self.a * self.a - c * c).sqrt()
    }

    /// Random ellipse whose angles are pairwise at least `min_gap` apart.
    pub fn random(rng: &mut impl Rng, a: f64, max_ecc: f64, min_gap: f64) -> Self {
        let ecc = rng.random_range(0.0..max_ecc);
        loop {
            let betas: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
            let ok = (0..5).all(|i| (0..i).all(|j| circular_gap(betas[i], betas[j]) >= min_gap));
            if ok {
                return Self { a, ecc, betas };
            }
        }
    }
}

fn circular_gap(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// `(a cos β − c, b sin β, 0)` for each angle.
pub fn sample_ellipse_points(spec: &EllipseSpec) -> [[f64; 3]; 5] {
    let (c, b) = (spec.c(), spec.b());
    spec.betas.map(|t| [spec.a * t.cos() - c, b * t.sin(), 0.0])
}

/// Proper rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(pub [[f64; 3]; 3]);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Rotation of the unit quaternion `q / ‖q‖`, with `q = (w, x, y, z)`.
    pub fn from_quaternion(q: [f64; 4]) -> Option<Self> {
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return None;
        }
        let [w, x, y, z] = q.map(|v| v / n);
        Some(Self([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]))
    }

    /// Uniformly distributed over SO(3).
    pub fn random(rng: &mut impl Rng) -> Self {
        loop {
            let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            if let Some(r) = Self::from_quaternion(q) {
                return r;
            }
        }
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        self.0.map(|row| dot(&row, &v))
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum())))
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// `max |RᵀR − 1|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let m = &self.0;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let g: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                worst = worst.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

/// Observers at `observers` looking at the sample points of `spec`, the
/// whole picture rotated by `rot`.
pub fn gen_single(spec: &EllipseSpec, observers: &[[f64; 3]; 5], rot: &Rotation) -> Result<Scenario, GenError> {
    let r = sample_ellipse_points(spec);
    let mut p = [[0.0; 3]; 5];
    let mut u = [[0.0; 3]; 5];
    for i in 0..5 {
        let d = sub3(&r[i], &observers[i]);
        if !(norm(&d) > 1e-12 * (norm(&r[i]) + norm(&observers[i]))) {
            return Err(GenError::DegenerateLine(i));
        }
        p[i] = rot.apply(observers[i]);
        u[i] = rot.apply(d);
    }
    let w = canonicalize(rot.apply([0.0, 0.0, 1.0]));
    Ok(Scenario::new(p, u)?.with_known_solutions(vec![w]))
}

/// Lines through `r_i` on the first ellipse and `R2·r′_i` on the second,
/// with `p_i = R2·r′_i + τ_i (r_i − R2·r′_i)`, then rotated by `r1`.
pub fn gen_two_solutions(
    spec1: &EllipseSpec,
    spec2: &EllipseSpec,
    r1: &Rotation,
    r2: &Rotation,
    tau: [f64; 5],
) -> Result<Scenario, GenError> {
    let a = sample_ellipse_points(spec1);
    let b = sample_ellipse_points(spec2).map(|q| r2.apply(q));
    let mut p = [[0.0; 3]; 5];
    let mut u = [[0.0; 3]; 5];
    for i in 0..5 {
        let d = sub3(&a[i], &b[i]);
        if !(norm(&d) > 1e-9 * (norm(&a[i]) + norm(&b[i]))) || !tau[i].is_finite() {
            return Err(GenError::DegenerateLine(i));
        }
        let pi = std::array::from_fn(|k| b[i][k] + tau[i] * d[k]);
        p[i] = r1.apply(pi);
        u[i] = r1.apply(d);
    }
    let w1 = canonicalize(r1.apply([0.0, 0.0, 1.0]));
    let w2 = canonicalize(r1.compose(r2).apply([0.0, 0.0, 1.0]));
    Ok(Scenario::new(p, u)?.with_known_solutions(vec![w1, w2]))
}

/// Smallest allowed `|û·w|`: lines meet every known orbital plane at no
/// less than 15°.
pub const MIN_LOS_SINE: f64 = 0.258_819_045_102_520_8;

const MAX_ATTEMPTS: usize = 1000;

fn grazes(s: &Scenario) -> bool {
    s.known_solutions.iter().any(|w| s.u.iter().any(|u| dot(u, w).abs() < MIN_LOS_SINE))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Single,
    Two,
}

/// Random single-ellipse scenario: `a ∈ [1, 2]`, `e ∈ [0, 0.8)`, observers
/// in the shell `1.5a ≤ ‖p‖ ≤ 3a`.
pub fn random_single(seed: u64) -> Result<Scenario, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let a = rng.random_range(1.0..2.0);
        let spec = EllipseSpec::random(&mut rng, a, 0.8, 0.3);
        let observers: [[f64; 3]; 5] = std::array::from_fn(|_| {
            let dir = random_unit(&mut rng);
            let rad = rng.random_range(1.5 * a..=3.0 * a);
            dir.map(|x| x * rad)
        });
        let rot = Rotation::random(&mut rng);
        match gen_single(&spec, &observers, &rot) {
            Ok(s) if !grazes(&s) => return Ok(s),
            _ => continue,
        }
    }
    Err(GenError::Exhausted(MAX_ATTEMPTS))
}

/// Random two-ellipse scenario with `τ_i ∈ [0.3, 0.7]` and the planes at
/// least 20° apart.
pub fn random_two_solutions(seed: u64) -> Result<Scenario, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_cos_gap = 20f64.to_radians().cos();
    for _ in 0..MAX_ATTEMPTS {
        let a1 = rng.random_range(1.0..2.0);
        let a2 = a1 * rng.random_range(0.7..1.3);
        let s1 = EllipseSpec::random(&mut rng, a1, 0.8, 0.3);
        let s2 = EllipseSpec::random(&mut rng, a2, 0.8, 0.3);
        let r1 = Rotation::random(&mut rng);
        let r2 = Rotation::random(&mut rng);
        let tau: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.3..=0.7));
        if r2.0[2][2].abs() > min_cos_gap {
            continue;
        }
        match gen_two_solutions(&s1, &s2, &r1, &r2, tau) {
            Ok(s) if !grazes(&s) => return Ok(s),
            _ => continue,
        }
    }
    Err(GenError::Exhausted(MAX_ATTEMPTS))
}

pub fn random_scenario(kind: Kind, seed: u64) -> Result<Scenario, GenError> {
    match kind {
        Kind::Single => random_single(seed),
        Kind::Two => random_two_solutions(seed),
    }
}

fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = norm(&v);
        if n > 1e-6 {
            return v.map(|x| x / n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mastermap::{fit_conic_f64, focus_residual, PlanarPoints};

    #[test]
    fn periapsis_and_apoapsis() {
        let s = EllipseSpec::new(2.0, 0.5, [0.0, std::f64::consts::PI, 1.0, 2.0, 4.0]).unwrap();
        let r = sample_ellipse_points(&s);
        assert!((r[0][0] - 1.0).abs() < 1e-15 && r[0][1].abs() < 1e-15);
        assert!((r[1][0] + 3.0).abs() < 1e-15 && r[1][1].abs() < 1e-12);
        for q in r {
            let v = ((q[0] + s.c()) / s.a).powi(2) + (q[1] / s.b()).powi(2);
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(EllipseSpec::new(1.0, 1.0, [0.0, 1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(EllipseSpec::new(-1.0, 0.1, [0.0, 1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(EllipseSpec::new(1.0, 0.1, [0.0, 1.0, 2.0, 3.0, std::f64::consts::TAU]).is_err());
    }

    #[test]
    fn sample_points_have_origin_as_focus() {
        let s = EllipseSpec::new(1.7, 0.6, [0.1, 1.3, 2.2, 3.9, 5.1]).unwrap();
        let r = sample_ellipse_points(&s);
        let pts = PlanarPoints { x: r.map(|q| q[0]), y: r.map(|q| q[1]), rho: [0.0; 5], r, slope: [1.0; 5] };
        let theta = fit_conic_f64(&pts).unwrap();
        let f = focus_residual(&theta);
        assert!(f[0].abs() < 1e-9 && f[1].abs() < 1e-9, "{f:?}");
    }

    #[test]
    fn random_rotations_are_proper() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let r = Rotation::random(&mut rng);
            assert!(r.orthogonality_defect() < 1e-12);
            assert!((r.det() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_with_identity_points_up() {
        let s = EllipseSpec::new(1.0, 0.3, [0.0, 1.0, 2.0, 3.0, 4.5]).unwrap();
        let sc = gen_single(&s, &[[0.0, 0.0, 5.0]; 5], &Rotation::IDENTITY).unwrap();
        assert_eq!(sc.known_solutions, vec![[0.0, 0.0, 1.0]]);
    }

    #[test]
    fn northern_flip() {
        let s = EllipseSpec::new(1.0, 0.3, [0.0, 1.0, 2.0, 3.0, 4.5]).unwrap();
        let flip = Rotation::from_quaternion([0.0, 1.0, 0.0, 0.0]).unwrap();
        let sc = gen_single(&s, &[[0.0, 0.0, 5.0]; 5], &flip).unwrap();
        assert!(sc.known_solutions[0][2] > 0.0);
    }

    #[test]
    fn coincident_points_are_rejected() {
        let s = EllipseSpec::new(1.0, 0.3, [0.0, 1.0, 2.0, 3.0, 4.5]).unwrap();
        let r = Rotation::IDENTITY;
        assert!(matches!(gen_two_solutions(&s, &s, &r, &r, [0.5; 5]), Err(GenError::DegenerateLine(0))));
    }

    #[test]
    fn generation_is_seed_deterministic() {
        assert_eq!(random_single(42).unwrap(), random_single(42).unwrap());
        assert_eq!(random_two_solutions(3).unwrap(), random_two_solutions(3).unwrap());
        assert_ne!(random_single(1).unwrap(), random_single(2).unwrap());
        assert_eq!(random_two_solutions(5).unwrap().known_solutions.len(), 2);
    }
}
