//! Interval oracles. Their verdicts are proofs about the map `F ∘ A` where
//! `A` is the triangle's floating-point local frame.

use super::heuristic::solve2;
use super::{Oracle, OracleConfig, Verdict};
use crate::interval::{Interval, IntervalBox, IntervalMatrix};
use crate::mastermap::{Mat2, MasterMap, NonEvaluable, Stage};
use crate::pplane::LocalFrame;
use crate::scalar::{norm, Scalar};

/// Result of one Krawczyk test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrawczykReport {
    pub input: IntervalBox,
    pub image: IntervalBox,
    /// `K(I)` lies in the interior of `I`: a zero of `F` exists in `I`.
    pub contained: bool,
    /// `‖1 − Y·□J(I)‖ < 1`: and it is the only one.
    pub unique: bool,
}

fn inv2(j: &Mat2) -> Result<Mat2, NonEvaluable> {
    let c0 = solve2(j, [1.0, 0.0], Stage::Interval)?;
    let c1 = solve2(j, [0.0, 1.0], Stage::Interval)?;
    Ok([[c0[0], c1[0]], [c0[1], c1[1]]])
}

/// `K(I) = x0 − Y·F([x0]) + (1 − Y·J(I))(I − x0)` with `x0` the box
/// midpoint and `Y` the inverse of the point Jacobian at `x0`.
pub fn krawczyk_with(
    b: &IntervalBox,
    f_at_mid: [Interval; 2],
    j_box: [[Interval; 2]; 2],
    j_mid: &Mat2,
) -> Result<KrawczykReport, NonEvaluable> {
    let x0 = b.midpoint();
    let y = inv2(j_mid)?.map(|r| r.map(Interval::point));
    let one = Interval::one();
    let zero = Interval::zero();
    let mut m = [[zero; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            let yj = y[i][0] * j_box[0][k] + y[i][1] * j_box[1][k];
            m[i][k] = if i == k { one - yj } else { -yj };
        }
    }
    let d = [0, 1].map(|k| b.0[k] - Interval::point(x0[k]));
    let k = [0, 1].map(|i| {
        Interval::point(x0[i]) - (y[i][0] * f_at_mid[0] + y[i][1] * f_at_mid[1]) + m[i][0] * d[0] + m[i][1] * d[1]
    });
    if !k.iter().all(|v| v.is_finite()) {
        return Err(NonEvaluable::new(Stage::Interval, "non-finite Krawczyk image"));
    }
    let image = IntervalBox(k);
    Ok(KrawczykReport {
        input: *b,
        image,
        contained: image.interior_of(b),
        unique: IntervalMatrix(m).norm() < 1.0,
    })
}

/// The Krawczyk test of the master map on `b`.
pub fn krawczyk(map: &MasterMap<'_>, b: &IntervalBox) -> Result<KrawczykReport, NonEvaluable> {
    let x0 = b.midpoint();
    let (_, j_mid) = map.eval_with_jacobian(x0)?;
    let f_mid = map.box_f(&IntervalBox::point(x0))?;
    let j_box = map.box_j(b)?;
    krawczyk_with(b, f_mid, j_box, &j_mid)
}

/// Reference box widened to absorb the rounding of the local frame, so it
/// covers the exact triangle and not only its floating-point image.
pub fn covering_box(frame: &LocalFrame) -> IntervalBox {
    let [ax, ay] = [frame.axis_x, frame.axis_y];
    let g = [
        ax.iter().map(|x| x * x).sum::<f64>(),
        ax.iter().zip(&ay).map(|(x, y)| x * y).sum::<f64>(),
        ay.iter().map(|y| y * y).sum::<f64>(),
    ];
    // smallest singular value of [ax ay]
    let tr = g[0] + g[2];
    let det = g[0] * g[2] - g[1] * g[1];
    let lam_min = (tr - (tr * tr - 4.0 * det).max(0.0).sqrt()) / 2.0;
    let sigma = lam_min.max(0.0).sqrt();
    let slack = 16.0 * f64::EPSILON * (norm(&frame.origin) + norm(&ax) + norm(&ay)) / sigma;
    let slack = if slack.is_finite() { slack.max(f64::EPSILON) } else { f64::INFINITY };
    let r = IntervalBox::reference();
    IntervalBox(r.0.map(|i| Interval::new(i.lo() - slack, i.hi() + slack)))
}

/// Rejects when the enclosure of `F` over the triangle's box excludes zero.
pub struct NonzeroCertified;

impl Oracle for NonzeroCertified {
    fn name(&self) -> &'static str {
        "nonzero_certified"
    }

    fn label(&self, map: &MasterMap<'_>, _: &OracleConfig) -> Verdict {
        let b = covering_box(map.frame());
        if !b.0.iter().all(|i| i.lo().is_finite() && i.hi().is_finite()) {
            return Verdict::Pass;
        }
        match map.box_f(&b) {
            Ok(f) if f.iter().any(|v| !v.contains_zero()) => Verdict::Reject,
            _ => Verdict::Pass,
        }
    }
}

/// Accepts when the Krawczyk image of the triangle's box lies inside it.
pub struct KrawczykCertified;

impl Oracle for KrawczykCertified {
    fn name(&self) -> &'static str {
        "krawczyk_certified"
    }

    fn label(&self, map: &MasterMap<'_>, _: &OracleConfig) -> Verdict {
        match krawczyk(map, &IntervalBox::reference()) {
            Ok(r) if r.contained => Verdict::Accept,
            _ => Verdict::Pass,
        }
    }
}
