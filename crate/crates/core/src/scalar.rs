//! Arithmetic abstraction shared by the point evaluator (`f64`) and the
//! interval enclosure ([`crate::interval::Interval`]).
//!
//! The master map is written once against [`Scalar`]; instantiating it with
//! intervals yields an enclosure of every stage.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use crate::mastermap::{NonEvaluable, Stage};

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn from_f64(x: f64) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn sqr(self) -> Self;

    fn sqrt(self) -> Self;

    /// Division that refuses denominators that are (or may be) within `eps`
    /// of zero. For intervals, `eps` is ignored and the test is `0 ∉ rhs`.
    fn checked_div(self, rhs: Self, eps: f64, stage: Stage) -> Result<Self, NonEvaluable>;

    /// Upper bound of `|x|`.
    fn mag(self) -> f64;

    /// A representative point value (the midpoint for intervals).
    fn mid(self) -> f64;

    fn is_finite(self) -> bool;

    /// Inverse of a 5×5 matrix, or an enclosure of the inverses of every
    /// member for interval matrices.
    fn invert5(m: &[[Self; 5]; 5]) -> Result<[[Self; 5]; 5], NonEvaluable>;
}

/// Condition number bound for the conic-fit system.
pub const KAPPA_MAX: f64 = 1e12;

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn sqr(self) -> Self {
        self * self
    }

    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    fn checked_div(self, rhs: Self, eps: f64, stage: Stage) -> Result<Self, NonEvaluable> {
        if rhs.abs() > eps && rhs.is_finite() {
            Ok(self / rhs)
        } else {
            Err(NonEvaluable::new(stage, "denominator vanishes"))
        }
    }

    fn mag(self) -> f64 {
        self.abs()
    }

    fn mid(self) -> f64 {
        self
    }

    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    fn invert5(m: &[[f64; 5]; 5]) -> Result<[[f64; 5]; 5], NonEvaluable> {
        let lu = Lu::factor(m).ok_or_else(|| NonEvaluable::new(Stage::FitConic, "singular system"))?;
        let inv = lu.inverse();
        let kappa = inf_norm(m) * inf_norm(&inv);
        if !(kappa < KAPPA_MAX) {
            return Err(NonEvaluable::new(Stage::FitConic, "ill-conditioned system"));
        }
        Ok(inv)
    }
}

pub(crate) fn inf_norm<const N: usize>(m: &[[f64; N]; N]) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<const N: usize> {
    lu: [[f64; N]; N],
    perm: [usize; N],
}

impl<const N: usize> Lu<N> {
    pub fn factor(a: &[[f64; N]; N]) -> Option<Self> {
        let mut lu = *a;
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        for k in 0..N {
            let piv = (k..N)
                .max_by(|&i, &j| lu[i][k].abs().total_cmp(&lu[j][k].abs()))
                .unwrap();
            if lu[piv][k] == 0.0 || !lu[piv][k].is_finite() {
                return None;
            }
            lu.swap(k, piv);
            perm.swap(k, piv);
            for i in k + 1..N {
                let f = lu[i][k] / lu[k][k];
                lu[i][k] = f;
                for j in k + 1..N {
                    lu[i][j] -= f * lu[k][j];
                }
            }
        }
        Some(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64; N]) -> [f64; N] {
        let mut x = [0.0; N];
        for i in 0..N {
            let mut s = b[self.perm[i]];
            for j in 0..i {
                s -= self.lu[i][j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..N).rev() {
            let mut s = x[i];
            for j in i + 1..N {
                s -= self.lu[i][j] * x[j];
            }
            x[i] = s / self.lu[i][i];
        }
        x
    }

    pub fn inverse(&self) -> [[f64; N]; N] {
        let mut inv = [[0.0; N]; N];
        for c in 0..N {
            let mut e = [0.0; N];
            e[c] = 1.0;
            let col = self.solve(&e);
            for r in 0..N {
                inv[r][c] = col[r];
            }
        }
        inv
    }
}

// Small fixed-size vector helpers, generic over the scalar.

pub fn dot<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn dot3f<T: Scalar>(a: &[T; 3], b: &[f64; 3]) -> T {
    a[0] * T::from_f64(b[0]) + a[1] * T::from_f64(b[1]) + a[2] * T::from_f64(b[2])
}

pub fn cross<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm_sq<T: Scalar>(a: &[T; 3]) -> T {
    a[0].sqr() + a[1].sqr() + a[2].sqr()
}

pub fn scale<T: Scalar>(a: &[T; 3], s: T) -> [T; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn add3<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn lift3<T: Scalar>(a: &[f64; 3]) -> [T; 3] {
    a.map(T::from_f64)
}

pub fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// `A (R×K) · B (K×C)`.
pub fn matmul<T: Scalar, const R: usize, const K: usize, const C: usize>(
    a: &[[T; K]; R],
    b: &[[T; C]; K],
) -> [[T; C]; R] {
    let mut out = [[T::zero(); C]; R];
    for i in 0..R {
        for j in 0..C {
            let mut s = T::zero();
            for k in 0..K {
                s = s + a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_and_inverts() {
        let a = [
            [2.0, 1.0, 0.0, 0.0, 3.0],
            [4.0, -1.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 5.0, 1.0],
            [1.0, 2.0, 3.0, 4.0, 5.0],
            [0.0, 7.0, 0.0, 1.0, 0.0],
        ];
        let lu = Lu::factor(&a).unwrap();
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let x = lu.solve(&b);
        for i in 0..5 {
            let r: f64 = (0..5).map(|j| a[i][j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        let prod = matmul(&a, &lu.inverse());
        for i in 0..5 {
            for j in 0..5 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i][j] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_is_rejected() {
        let mut a = [[1.0; 5]; 5];
        a[0][0] = 2.0;
        assert!(f64::invert5(&a).is_err());
    }

    #[test]
    fn checked_div_guards() {
        assert!(1.0f64.checked_div(1e-11, 1e-10, Stage::Intersect).is_err());
        assert_eq!(1.0f64.checked_div(2.0, 1e-10, Stage::Intersect).unwrap(), 0.5);
    }
}
