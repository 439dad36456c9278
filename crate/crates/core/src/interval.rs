//! Interval arithmetic with outward rounding.
//!
//! Every endpoint is rounded in the safe direction. Rounding error of the
//! nearest-rounded result is recovered exactly (TwoSum / FMA residuals) so
//! exact results are not widened; outside the range where the residual is
//! exact the result is widened by one ulp instead.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::mastermap::{NonEvaluable, Stage};
use crate::scalar::{Lu, Scalar};

const SAFE_LO: f64 = 1e-280;
const SAFE_HI: f64 = 1e280;

fn in_safe_range(x: f64) -> bool {
    let a = x.abs();
    a == 0.0 || (SAFE_LO..=SAFE_HI).contains(&a)
}

/// Rounds the pair (computed value, exact error sign) down.
fn round_down(v: f64, err_sign: f64) -> f64 {
    if err_sign < 0.0 {
        v.next_down()
    } else {
        v
    }
}

fn round_up(v: f64, err_sign: f64) -> f64 {
    if err_sign > 0.0 {
        v.next_up()
    } else {
        v
    }
}

fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() || !in_safe_range(s) {
        return if s.is_finite() { s.next_down() } else { s };
    }
    round_down(s, two_sum_err(a, b, s))
}

pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() || !in_safe_range(s) {
        return if s.is_finite() { s.next_up() } else { s };
    }
    round_up(s, two_sum_err(a, b, s))
}

pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    if p == 0.0 {
        // exact zero only when a factor is zero
        return if a == 0.0 || b == 0.0 { 0.0 } else { (-0.0f64).next_down() };
    }
    if !in_safe_range(p) {
        return p.next_down();
    }
    round_down(p, a.mul_add(b, -p))
}

pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    if p == 0.0 {
        return if a == 0.0 || b == 0.0 { 0.0 } else { 0.0f64.next_up() };
    }
    if !in_safe_range(p) {
        return p.next_up();
    }
    round_up(p, a.mul_add(b, -p))
}

fn div_err_sign(a: f64, b: f64, q: f64) -> f64 {
    // a − q·b is exact; true quotient − q has the sign of (a − q·b)/b.
    let r = (-q).mul_add(b, a);
    r * b.signum()
}

pub fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    if q == 0.0 {
        return if a == 0.0 { 0.0 } else { (-0.0f64).next_down() };
    }
    if !in_safe_range(q) || !in_safe_range(b) {
        return q.next_down();
    }
    round_down(q, div_err_sign(a, b, q))
}

pub fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    if q == 0.0 {
        return if a == 0.0 { 0.0 } else { 0.0f64.next_up() };
    }
    if !in_safe_range(q) || !in_safe_range(b) {
        return q.next_up();
    }
    round_up(q, div_err_sign(a, b, q))
}

fn sqrt_err_sign(x: f64, s: f64) -> f64 {
    (-s).mul_add(s, x)
}

pub fn sqrt_down(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s = x.sqrt();
    if !in_safe_range(x) {
        return s.next_down().max(0.0);
    }
    round_down(s, sqrt_err_sign(x, s))
}

pub fn sqrt_up(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s = x.sqrt();
    if !in_safe_range(x) {
        return s.next_up();
    }
    round_up(s, sqrt_err_sign(x, s))
}

/// A closed interval `[lo, hi]`.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(self) -> f64 {
        let m = 0.5 * self.lo + 0.5 * self.hi;
        m.clamp(self.lo, self.hi)
    }

    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(self) -> bool {
        self.contains(0.0)
    }

    pub fn subset_of(self, other: Self) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Containment in the interior of `other`.
    pub fn interior_of(self, other: Self) -> bool {
        other.lo < self.lo && self.hi < other.hi
    }

    pub fn hull(self, other: Self) -> Self {
        Self { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn intersect(self, other: Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Self { lo, hi })
    }

    /// Smallest absolute value over the interval.
    pub fn mig(self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn div(self, rhs: Self) -> Result<Self, NonEvaluable> {
        if rhs.contains_zero() || rhs.lo.is_nan() || rhs.hi.is_nan() {
            return Err(NonEvaluable::new(Stage::Interval, "division by an interval containing zero"));
        }
        let c = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let lo = c.iter().map(|&(a, b)| div_down(a, b)).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|&(a, b)| div_up(a, b)).fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { lo, hi })
    }
}

impl Add for Interval {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { lo: add_down(self.lo, rhs.lo), hi: add_up(self.hi, rhs.hi) }
    }
}

impl Sub for Interval {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { lo: add_down(self.lo, -rhs.hi), hi: add_up(self.hi, -rhs.lo) }
    }
}

impl Neg for Interval {
    type Output = Self;
    fn neg(self) -> Self {
        Self { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for Interval {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.lo == self.hi && rhs.lo == rhs.hi {
            let (a, b) = (self.lo, rhs.lo);
            return Self { lo: mul_down(a, b), hi: mul_up(a, b) };
        }
        let c = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let lo = c.iter().map(|&(a, b)| mul_down(a, b)).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|&(a, b)| mul_up(a, b)).fold(f64::NEG_INFINITY, f64::max);
        Self { lo, hi }
    }
}

impl Scalar for Interval {
    fn from_f64(x: f64) -> Self {
        Self::point(x)
    }

    fn sqr(self) -> Self {
        let (a, b) = (self.lo.abs(), self.hi.abs());
        if self.contains_zero() {
            Self { lo: 0.0, hi: mul_up(a.max(b), a.max(b)) }
        } else {
            let (m, x) = (a.min(b), a.max(b));
            Self { lo: mul_down(m, m), hi: mul_up(x, x) }
        }
    }

    fn sqrt(self) -> Self {
        if self.hi < 0.0 || self.hi.is_nan() {
            return Self { lo: f64::NAN, hi: f64::NAN };
        }
        Self { lo: sqrt_down(self.lo.max(0.0)), hi: sqrt_up(self.hi) }
    }

    fn checked_div(self, rhs: Self, _eps: f64, stage: Stage) -> Result<Self, NonEvaluable> {
        self.div(rhs).map_err(|e| NonEvaluable::new(stage, e.reason))
    }

    fn mag(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    fn mid(self) -> f64 {
        self.midpoint()
    }

    fn is_finite(self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    fn invert5(m: &[[Self; 5]; 5]) -> Result<[[Self; 5]; 5], NonEvaluable> {
        let fail = |why: &'static str| NonEvaluable::new(Stage::FitConic, why);
        if m.iter().flatten().any(|x| !x.is_finite()) {
            return Err(fail("non-finite interval matrix"));
        }
        let mid = m.map(|row| row.map(Interval::midpoint));
        let lu = Lu::factor(&mid).ok_or_else(|| fail("singular midpoint matrix"))?;
        let c = lu.inverse();
        if c.iter().flatten().any(|x| !x.is_finite()) {
            return Err(fail("singular midpoint matrix"));
        }
        let c_iv = c.map(|row| row.map(Interval::point));
        let g = crate::scalar::matmul(&c_iv, m);
        // β = ‖1 − G‖∞ < 1 makes G strictly diagonally dominant and bounds G⁻¹.
        let mut e = g.map(|row| row.map(|x| -x));
        for (i, row) in e.iter_mut().enumerate() {
            row[i] = row[i] + Interval::point(1.0);
        }
        let beta = IntervalMatrix(e).norm();
        if !(beta < 1.0) {
            return Err(fail("preconditioned system not diagonally dominant"));
        }
        // ‖x − e_k‖ ≤ β/(1−β) for the solution of G x = e_k.
        let radius = (Interval::point(beta) / (Interval::point(1.0) - Interval::point(beta)))
            .map_err(|_| fail("contraction bound"))?
            .hi;
        let mut ginv = [[Interval::point(0.0); 5]; 5];
        for k in 0..5 {
            let mut x = [Interval::new(-radius, radius); 5];
            x[k] = Interval::new(add_down(1.0, -radius), add_up(1.0, radius));
            for _sweep in 0..3 {
                for i in 0..5 {
                    let mut rhs = Interval::point(if i == k { 1.0 } else { 0.0 });
                    for j in 0..5 {
                        if j != i {
                            rhs = rhs - g[i][j] * x[j];
                        }
                    }
                    let xi = rhs.div(g[i][i]).map_err(|_| fail("zero diagonal"))?;
                    x[i] = xi.intersect(x[i]).ok_or_else(|| fail("empty Gauss-Seidel update"))?;
                }
            }
            for i in 0..5 {
                ginv[i][k] = x[i];
            }
        }
        Ok(crate::scalar::matmul(&ginv, &c_iv))
    }
}

impl std::ops::Div for Interval {
    type Output = Result<Interval, NonEvaluable>;
    fn div(self, rhs: Self) -> Self::Output {
        Interval::div(self, rhs)
    }
}

/// A 2-box in local coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalBox(pub [Interval; 2]);

impl IntervalBox {
    pub fn new(x: Interval, y: Interval) -> Self {
        Self([x, y])
    }

    pub fn point(z: [f64; 2]) -> Self {
        Self(z.map(Interval::point))
    }

    /// Bounding box of the reference triangle, which covers it exactly.
    pub fn reference() -> Self {
        Self([Interval::new(-0.5, 1.0), Interval::new(-0.5, 0.5)])
    }

    pub fn midpoint(&self) -> [f64; 2] {
        self.0.map(Interval::midpoint)
    }

    pub fn contains(&self, z: [f64; 2]) -> bool {
        self.0[0].contains(z[0]) && self.0[1].contains(z[1])
    }

    pub fn subset_of(&self, other: &Self) -> bool {
        self.0[0].subset_of(other.0[0]) && self.0[1].subset_of(other.0[1])
    }

    pub fn interior_of(&self, other: &Self) -> bool {
        self.0[0].interior_of(other.0[0]) && self.0[1].interior_of(other.0[1])
    }
}

/// Square interval matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalMatrix<const N: usize>(pub [[Interval; N]; N]);

impl<const N: usize> IntervalMatrix<N> {
    /// `max_{A∈M} ‖A‖∞`: the largest row sum of entry magnitudes, rounded up.
    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|row| row.iter().fold(0.0, |acc, x| add_up(acc, x.mag())))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::FromPrimitive;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b)
    }

    #[test]
    fn basic_ops() {
        assert_eq!(iv(1.0, 2.0) + iv(3.0, 4.0), iv(4.0, 6.0));
        assert_eq!(iv(-1.0, 2.0) * iv(3.0, 4.0), iv(-4.0, 8.0));
        assert_eq!(iv(1.0, 2.0) - iv(3.0, 4.0), iv(-3.0, -1.0));
        assert!(iv(1.0, 4.0).div(iv(0.0, 2.0)).is_err());
        assert_eq!(iv(1.0, 4.0).div(iv(2.0, 4.0)).unwrap(), iv(0.25, 2.0));
        assert_eq!(iv(-2.0, 3.0).sqr(), iv(0.0, 9.0));
        assert_eq!(iv(-1.0, 4.0).sqrt(), iv(0.0, 2.0));
    }

    #[test]
    fn inexact_results_are_bracketed() {
        let third = Interval::point(1.0).div(Interval::point(3.0)).unwrap();
        assert!(third.lo() < third.hi());
        assert!(third.lo() <= 1.0 / 3.0 && 1.0 / 3.0 <= third.hi());
        let s = Interval::point(2.0).sqrt();
        assert!(s.lo() < s.hi());
        let tenth = Interval::point(0.1) + Interval::point(0.2);
        assert!(tenth.lo() < tenth.hi());
    }

    fn exact(x: f64) -> BigRational {
        BigRational::from_f64(x).unwrap()
    }

    fn brackets(i: Interval, r: &BigRational) -> bool {
        exact(i.lo()) <= *r && *r <= exact(i.hi())
    }

    #[test]
    fn ops_contain_exact_rational_results() {
        // dyadic inputs, exact rational reference values
        let xs: Vec<f64> = (1..40).map(|k| (k as f64) * 0.3711 - 7.0).map(|x| (x * 1024.0).round() / 1024.0 + 1.0 / 3.0).collect();
        for &a in &xs {
            for &b in &xs {
                let (ea, eb) = (exact(a), exact(b));
                let (ia, ib) = (Interval::point(a), Interval::point(b));
                assert!(brackets(ia + ib, &(&ea + &eb)));
                assert!(brackets(ia - ib, &(&ea - &eb)));
                assert!(brackets(ia * ib, &(&ea * &eb)));
                if b != 0.0 {
                    assert!(brackets(ia.div(ib).unwrap(), &(&ea / &eb)));
                }
            }
            if a > 0.0 {
                let s = Interval::point(a).sqrt();
                let (lo, hi) = (exact(s.lo()), exact(s.hi()));
                assert!(&lo * &lo <= exact(a) && exact(a) <= &hi * &hi);
            }
        }
    }

    #[test]
    fn matrix_norm() {
        let id = IntervalMatrix([[iv(1.0, 1.0), iv(0.0, 0.0)], [iv(0.0, 0.0), iv(1.0, 1.0)]]);
        assert_eq!(id.norm(), 1.0);
        let full = IntervalMatrix([[iv(-1.0, 1.0); 2]; 2]);
        assert_eq!(full.norm(), 2.0);
        assert_eq!(IntervalMatrix([[iv(0.0, 0.0); 2]; 2]).norm(), 0.0);
    }

    #[test]
    fn interval_inverse_encloses_point_inverse() {
        let a = [
            [2.0, 1.0, 0.0, 0.0, 3.0],
            [4.0, -1.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 5.0, 1.0],
            [1.0, 2.0, 3.0, 4.0, 5.0],
            [0.0, 7.0, 0.0, 1.0, 0.0],
        ];
        let widened = a.map(|r| r.map(|x| iv(x - 1e-9, x + 1e-9)));
        let inv = Interval::invert5(&widened).unwrap();
        let p = f64::invert5(&a).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!(inv[i][j].contains(p[i][j]));
                assert!(inv[i][j].width() < 1e-6);
            }
        }
    }
}
