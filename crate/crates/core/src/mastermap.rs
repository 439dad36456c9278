//! The master map `F: R² → R²` whose zeros are orbital-plane normals of
//! conics through the five lines of sight with a focus at the origin.
//!
//! `F` is the composition
//!
//! ```text
//! local (R²) → normal (R³) → unit normal → frame (w, v1, v2)
//!            → planar points (x_i, y_i) → conic θ → focus residual (R²)
//! ```
//!
//! Each stage is written once against [`Scalar`], so the same code yields
//! point values (`f64`) and interval enclosures. The Jacobian is assembled
//! from closed-form stage Jacobians by the chain rule.

use std::cell::{Cell, RefCell};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::interval::{Interval, IntervalBox};
use crate::pplane::{LocalFrame, Triangle};
use crate::scalar::{
    add3, cross, dot, dot3f, lift3, matmul, norm, norm_sq, scale, Scalar,
};

pub const EPS_NORM: f64 = 1e-12;
pub const EPS_FRAME: f64 = 1e-10;
pub const EPS_LOS: f64 = 1e-10;

/// Pipeline stage that failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Normalize,
    Frame,
    Intersect,
    FitConic,
    Focus,
    Interval,
    Newton,
    GradientStep,
}

/// A typed evaluation failure (line of sight parallel to the plane, singular
/// conic fit, vanishing denominator, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("not evaluable at stage {stage:?}: {reason}")]
pub struct NonEvaluable {
    pub stage: Stage,
    pub reason: &'static str,
}

impl NonEvaluable {
    pub fn new(stage: Stage, reason: &'static str) -> Self {
        Self { stage, reason }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("direction vector {0} has zero length")]
    ZeroDirection(usize),
}

/// Five lines of sight `p_i + t·u_i`. Directions are unit-normalized on
/// construction; this rescales each `ρ_i` but leaves the zeros of `F` alone.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub p: [[f64; 3]; 5],
    pub u: [[f64; 3]; 5],
    pub known_solutions: Vec<[f64; 3]>,
    pub length_unit: Option<String>,
}

impl Scenario {
    pub fn new(p: [[f64; 3]; 5], u: [[f64; 3]; 5]) -> Result<Self, ScenarioError> {
        if p.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ScenarioError::NonFinite("p"));
        }
        if u.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ScenarioError::NonFinite("u"));
        }
        let mut un = u;
        for (i, d) in un.iter_mut().enumerate() {
            let n = norm(d);
            if !(n > 0.0) {
                return Err(ScenarioError::ZeroDirection(i));
            }
            *d = d.map(|x| x / n);
        }
        Ok(Self { p, u: un, known_solutions: Vec::new(), length_unit: None })
    }

    pub fn with_known_solutions(mut self, w: Vec<[f64; 3]>) -> Self {
        self.known_solutions = w;
        self
    }

    /// Power-of-two length scale close to the largest observer distance.
    pub fn length_scale(&self) -> f64 {
        let m = self.p.iter().map(norm).fold(0.0, f64::max);
        if m > 0.0 && m.is_finite() {
            m.log2().round().exp2()
        } else {
            1.0
        }
    }

    /// Copy with positions divided by [`Self::length_scale`]. The scaling is
    /// exact in floating point; `F` scales uniformly so its zeros and every
    /// scale-free oracle are unchanged.
    pub fn nondimensionalized(&self) -> (Scenario, f64) {
        let s = self.length_scale();
        let mut out = self.clone();
        for p in &mut out.p {
            *p = p.map(|x| x / s);
        }
        (out, s)
    }
}

/// Orthonormal frame `(w, v1, v2)` completing the plane normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame<T> {
    pub w: [T; 3],
    pub v1: [T; 3],
    pub v2: [T; 3],
}

/// Intersections of the lines of sight with the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarPoints<T> {
    pub x: [T; 5],
    pub y: [T; 5],
    pub rho: [T; 5],
    pub r: [[T; 3]; 5],
    /// `u_i · w`
    pub slope: [T; 5],
}

/// `a x² + b y² + c xy + d x + e y + 1 = 0`, stored as `[a, b, c, d, e]`
/// (column order of the fitting matrix).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConicCoeffs<T>(pub [T; 5]);

impl<T: Scalar> ConicCoeffs<T> {
    pub fn a(&self) -> T {
        self.0[0]
    }
    pub fn b(&self) -> T {
        self.0[1]
    }
    pub fn c(&self) -> T {
        self.0[2]
    }
    pub fn d(&self) -> T {
        self.0[3]
    }
    pub fn e(&self) -> T {
        self.0[4]
    }
}

impl ConicCoeffs<f64> {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let [a, b, c, d, e] = self.0;
        a * x * x + b * y * y + c * x * y + d * x + e * y + 1.0
    }
}

/// Values of the two focus polynomials; both vanish iff the origin is a
/// focus of the conic.
pub type FocusResidual<T> = [T; 2];

pub fn normalize<T: Scalar>(w: &[T; 3]) -> Result<[T; 3], NonEvaluable> {
    let n = norm_sq(w).sqrt();
    let inv = T::one().checked_div(n, EPS_NORM, Stage::Normalize)?;
    Ok(scale(w, inv))
}

pub fn build_frame<T: Scalar>(w: &[T; 3], u1: &[f64; 3]) -> Result<Frame<T>, NonEvaluable> {
    let c = cross(w, &lift3(u1));
    let s = norm_sq(&c).sqrt();
    let v2 = scale(&c, T::one().checked_div(s, EPS_FRAME, Stage::Frame)?);
    let d = cross(&v2, w);
    let t = norm_sq(&d).sqrt();
    let v1 = scale(&d, T::one().checked_div(t, EPS_FRAME, Stage::Frame)?);
    Ok(Frame { w: *w, v1, v2 })
}

/// `ρ_i = −(p_i·w)/(u_i·w)`, `r_i = p_i + ρ_i u_i` for every line of sight.
pub fn intersection_points<T: Scalar>(
    w: &[T; 3],
    s: &Scenario,
) -> Result<([T; 5], [[T; 3]; 5], [T; 5]), NonEvaluable> {
    let mut rho = [T::zero(); 5];
    let mut r = [[T::zero(); 3]; 5];
    let mut slope = [T::zero(); 5];
    for i in 0..5 {
        let pw = dot3f(w, &s.p[i]);
        let uw = dot3f(w, &s.u[i]);
        rho[i] = (-pw).checked_div(uw, EPS_LOS, Stage::Intersect)?;
        r[i] = add3(&lift3(&s.p[i]), &scale(&lift3(&s.u[i]), rho[i]));
        slope[i] = uw;
    }
    Ok((rho, r, slope))
}

pub fn intersect_plane<T: Scalar>(f: &Frame<T>, s: &Scenario) -> Result<PlanarPoints<T>, NonEvaluable> {
    let (rho, r, slope) = intersection_points(&f.w, s)?;
    let x = r.map(|ri| dot(&ri, &f.v1));
    let y = r.map(|ri| dot(&ri, &f.v2));
    Ok(PlanarPoints { x, y, rho, r, slope })
}

/// The fitting matrix `M` with rows `[x², y², xy, x, y]`.
pub fn conic_matrix<T: Scalar>(pts: &PlanarPoints<T>) -> [[T; 5]; 5] {
    std::array::from_fn(|i| {
        let (x, y) = (pts.x[i], pts.y[i]);
        [x.sqr(), y.sqr(), x * y, x, y]
    })
}

/// Solves `M θ = −1`. Returns θ together with `M⁻¹`, which the Jacobian
/// needs.
pub fn fit_conic<T: Scalar>(pts: &PlanarPoints<T>) -> Result<(ConicCoeffs<T>, [[T; 5]; 5]), NonEvaluable> {
    let m = conic_matrix(pts);
    let inv = T::invert5(&m)?;
    let theta = std::array::from_fn(|i| -(inv[i][0] + inv[i][1] + inv[i][2] + inv[i][3] + inv[i][4]));
    Ok((ConicCoeffs(theta), inv))
}

/// Real-valued fit by direct elimination (no explicit inverse).
pub fn fit_conic_f64(pts: &PlanarPoints<f64>) -> Result<ConicCoeffs<f64>, NonEvaluable> {
    let m = conic_matrix(pts);
    let lu = crate::scalar::Lu::factor(&m).ok_or(NonEvaluable::new(Stage::FitConic, "singular system"))?;
    let inv = lu.inverse();
    if !(crate::scalar::inf_norm(&m) * crate::scalar::inf_norm(&inv) < crate::scalar::KAPPA_MAX) {
        return Err(NonEvaluable::new(Stage::FitConic, "ill-conditioned system"));
    }
    Ok(ConicCoeffs(lu.solve(&[-1.0; 5])))
}

/// `[e² − 4b − d² + 4a, de − 2c]`.
pub fn focus_residual<T: Scalar>(th: &ConicCoeffs<T>) -> FocusResidual<T> {
    let four = T::from_f64(4.0);
    let two = T::from_f64(2.0);
    [
        th.e().sqr() - four * th.b() - th.d().sqr() + four * th.a(),
        th.d() * th.e() - two * th.c(),
    ]
}

/// Every intermediate value of one evaluation.
#[derive(Clone, Debug)]
pub struct Pipeline<T> {
    pub z: [T; 2],
    pub w_raw: [T; 3],
    pub w_len: T,
    pub frame: Frame<T>,
    pub planar: PlanarPoints<T>,
    pub theta: ConicCoeffs<T>,
    pub m_inv: [[T; 5]; 5],
    pub value: FocusResidual<T>,
}

pub fn local_to_normal<T: Scalar>(lf: &LocalFrame, z: &[T; 2]) -> [T; 3] {
    std::array::from_fn(|k| {
        T::from_f64(lf.origin[k]) + z[0] * T::from_f64(lf.axis_x[k]) + z[1] * T::from_f64(lf.axis_y[k])
    })
}

pub fn forward<T: Scalar>(s: &Scenario, lf: &LocalFrame, z: [T; 2]) -> Result<Pipeline<T>, NonEvaluable> {
    let w_raw = local_to_normal(lf, &z);
    let w_len = norm_sq(&w_raw).sqrt();
    let w = normalize(&w_raw)?;
    let frame = build_frame(&w, &s.u[0])?;
    let planar = intersect_plane(&frame, s)?;
    let (theta, m_inv) = fit_conic(&planar)?;
    let value = focus_residual(&theta);
    if !value.iter().all(|v| v.is_finite()) || !theta.0.iter().all(|v| v.is_finite()) {
        return Err(NonEvaluable::new(Stage::Focus, "non-finite residual"));
    }
    Ok(Pipeline { z, w_raw, w_len, frame, planar, theta, m_inv, value })
}

// Stage Jacobians. Frame vectors are stacked as [w, v1, v2] (9 entries);
// planar points as [x_1..x_5, y_1..y_5] (10 entries).

fn skew<T: Scalar>(a: &[T; 3]) -> [[T; 3]; 3] {
    let z = T::zero();
    [[z, -a[2], a[1]], [a[2], z, -a[0]], [-a[1], a[0], z]]
}

/// `(I − v vᵀ) / len`: derivative of `x ↦ x/‖x‖` at a point with unit
/// direction `v` and length `len`.
fn unit_projector<T: Scalar>(v: &[T; 3], len: T, stage: Stage) -> Result<[[T; 3]; 3], NonEvaluable> {
    let inv = T::one().checked_div(len, EPS_NORM, stage)?;
    Ok(std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let id = if i == j { T::one() } else { T::zero() };
            (id - v[i] * v[j]) * inv
        })
    }))
}

pub fn jac_local(lf: &LocalFrame) -> [[f64; 2]; 3] {
    lf.jacobian()
}

pub fn jac_normalize<T: Scalar>(w_unit: &[T; 3], w_len: T) -> Result<[[T; 3]; 3], NonEvaluable> {
    unit_projector(w_unit, w_len, Stage::Normalize)
}

pub fn jac_frame<T: Scalar>(f: &Frame<T>, u1: &[f64; 3]) -> Result<[[T; 3]; 9], NonEvaluable> {
    let w = &f.w;
    let u1 = lift3(u1);
    let c = cross(w, &u1);
    let c_len = norm_sq(&c).sqrt();
    // d(w × u1)/dw = −[u1]×
    let dc = skew(&u1).map(|row| row.map(|x| -x));
    let dv2 = matmul(&unit_projector(&f.v2, c_len, Stage::Frame)?, &dc);
    let d = cross(&f.v2, w);
    let d_len = norm_sq(&d).sqrt();
    // d(v2 × w) = −[w]× dv2 + [v2]× dw
    let neg_sw = skew(w).map(|row| row.map(|x| -x));
    let a = matmul(&neg_sw, &dv2);
    let b = skew(&f.v2);
    let dd: [[T; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]));
    let dv1 = matmul(&unit_projector(&f.v1, d_len, Stage::Frame)?, &dd);
    let mut out = [[T::zero(); 3]; 9];
    for i in 0..3 {
        out[i][i] = T::one();
        out[3 + i] = dv1[i];
        out[6 + i] = dv2[i];
    }
    Ok(out)
}

pub fn jac_intersect<T: Scalar>(
    f: &Frame<T>,
    pts: &PlanarPoints<T>,
    s: &Scenario,
) -> Result<[[T; 9]; 10], NonEvaluable> {
    let mut out = [[T::zero(); 9]; 10];
    for i in 0..5 {
        let ui = lift3(&s.u[i]);
        // dr_i/dw = −u_i r_iᵀ / (u_i·w)
        let inv = T::one().checked_div(pts.slope[i], EPS_LOS, Stage::Intersect)?;
        let ux = dot(&f.v1, &ui);
        let uy = dot(&f.v2, &ui);
        for k in 0..3 {
            let dr = -pts.r[i][k] * inv;
            out[i][k] = ux * dr;
            out[5 + i][k] = uy * dr;
            out[i][3 + k] = pts.r[i][k];
            out[5 + i][6 + k] = pts.r[i][k];
        }
    }
    Ok(out)
}

/// `dθ = −M⁻¹ (dM) θ`, column by column.
pub fn jac_fit<T: Scalar>(pts: &PlanarPoints<T>, th: &ConicCoeffs<T>, m_inv: &[[T; 5]; 5]) -> [[T; 10]; 5] {
    let two = T::from_f64(2.0);
    let mut out = [[T::zero(); 10]; 5];
    for i in 0..5 {
        let (x, y) = (pts.x[i], pts.y[i]);
        let gx = two * th.a() * x + th.c() * y + th.d();
        let gy = two * th.b() * y + th.c() * x + th.e();
        for k in 0..5 {
            out[k][i] = -m_inv[k][i] * gx;
            out[k][5 + i] = -m_inv[k][i] * gy;
        }
    }
    out
}

pub fn jac_focus<T: Scalar>(th: &ConicCoeffs<T>) -> [[T; 5]; 2] {
    let two = T::from_f64(2.0);
    let four = T::from_f64(4.0);
    let z = T::zero();
    [
        [four, -four, z, -(two * th.d()), two * th.e()],
        [z, z, -two, th.e(), th.d()],
    ]
}

/// Chain-rule Jacobian `∂F/∂z` of an already evaluated pipeline.
pub fn jacobian<T: Scalar>(s: &Scenario, lf: &LocalFrame, p: &Pipeline<T>) -> Result<[[T; 2]; 2], NonEvaluable> {
    let jx = jac_local(lf).map(|row| row.map(T::from_f64));
    let k1 = matmul(&jac_normalize(&p.frame.w, p.w_len)?, &jx);
    let k2 = matmul(&jac_frame(&p.frame, &s.u[0])?, &k1);
    let k3 = matmul(&jac_intersect(&p.frame, &p.planar, s)?, &k2);
    let k4 = matmul(&jac_fit(&p.planar, &p.theta, &p.m_inv), &k3);
    let j = matmul(&jac_focus(&p.theta), &k4);
    if !j.iter().flatten().all(|v| v.is_finite()) {
        return Err(NonEvaluable::new(Stage::Focus, "non-finite Jacobian"));
    }
    Ok(j)
}

pub type Mat2 = [[f64; 2]; 2];

/// `F` evaluated at a local point of a triangle.
pub fn eval_f(s: &Scenario, t: &Triangle, z: [f64; 2]) -> Result<[f64; 2], NonEvaluable> {
    forward(s, &t.local_frame(), z).map(|p| p.value)
}

pub fn eval_j(s: &Scenario, t: &Triangle, z: [f64; 2]) -> Result<Mat2, NonEvaluable> {
    let lf = t.local_frame();
    let p = forward(s, &lf, z)?;
    jacobian(s, &lf, &p)
}

type Memo = Vec<([f64; 2], Result<Pipeline<f64>, NonEvaluable>)>;

/// The master map of one triangle, with a count of the 5×5 real solves it
/// performs (the dominant cost). Point evaluations are memoized, so oracles
/// sharing a point (the centre, the vertices) pay for it once.
pub struct MasterMap<'a> {
    scenario: &'a Scenario,
    frame: LocalFrame,
    solves: Cell<u64>,
    jacobians: Cell<u64>,
    memo: RefCell<Memo>,
}

impl fmt::Debug for MasterMap<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MasterMap")
            .field("frame", &self.frame)
            .field("solves", &self.solves.get())
            .finish()
    }
}

impl<'a> MasterMap<'a> {
    pub fn new(scenario: &'a Scenario, triangle: &Triangle) -> Self {
        Self::with_frame(scenario, triangle.local_frame())
    }

    pub fn with_frame(scenario: &'a Scenario, frame: LocalFrame) -> Self {
        Self { scenario, frame, solves: Cell::new(0), jacobians: Cell::new(0), memo: RefCell::new(Vec::new()) }
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn frame(&self) -> &LocalFrame {
        &self.frame
    }

    pub fn bottleneck_calls(&self) -> u64 {
        self.solves.get()
    }

    /// Point Jacobians requested, memo hits included.
    pub fn jacobian_evals(&self) -> u64 {
        self.jacobians.get()
    }

    fn pipeline(&self, z: [f64; 2]) -> Result<Pipeline<f64>, NonEvaluable> {
        let key = z.map(f64::to_bits);
        if let Some((_, hit)) = self.memo.borrow().iter().find(|(k, _)| k.map(f64::to_bits) == key) {
            return hit.clone();
        }
        let out = forward(self.scenario, &self.frame, z);
        self.memo.borrow_mut().push((z, out.clone()));
        // The solve happens whenever the pipeline reaches the conic fit.
        match &out {
            Ok(_) => self.solves.set(self.solves.get() + 1),
            Err(e) if matches!(e.stage, Stage::FitConic | Stage::Focus) => {
                self.solves.set(self.solves.get() + 1)
            }
            Err(_) => {}
        }
        out
    }

    pub fn eval(&self, z: [f64; 2]) -> Result<[f64; 2], NonEvaluable> {
        self.pipeline(z).map(|p| p.value)
    }

    pub fn eval_with_jacobian(&self, z: [f64; 2]) -> Result<([f64; 2], Mat2), NonEvaluable> {
        let p = self.pipeline(z)?;
        self.jacobians.set(self.jacobians.get() + 1);
        let j = jacobian(self.scenario, &self.frame, &p)?;
        Ok((p.value, j))
    }

    pub fn pipeline_at(&self, z: [f64; 2]) -> Result<Pipeline<f64>, NonEvaluable> {
        self.pipeline(z)
    }

    /// `‖r_i‖` for the plane through the image of `z`; needs no conic fit.
    pub fn intersection_norms(&self, z: [f64; 2]) -> Result<[f64; 5], NonEvaluable> {
        let w = normalize(&local_to_normal(&self.frame, &z))?;
        let (_, r, _) = intersection_points(&w, self.scenario)?;
        Ok(r.map(|ri| norm(&ri)))
    }

    /// Interval enclosure of `F` over a box of local coordinates.
    pub fn box_f(&self, b: &IntervalBox) -> Result<[Interval; 2], NonEvaluable> {
        forward::<Interval>(self.scenario, &self.frame, b.0).map(|p| p.value)
    }

    /// Interval enclosure of the Jacobian over a box.
    pub fn box_j(&self, b: &IntervalBox) -> Result<[[Interval; 2]; 2], NonEvaluable> {
        let p = forward::<Interval>(self.scenario, &self.frame, b.0)?;
        jacobian(self.scenario, &self.frame, &p)
    }
}
