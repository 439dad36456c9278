//! Exact dyadic-rational points on the octahedron surface.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A point `num / 2^exp` in R³ with a shared power-of-two denominator.
///
/// The representation is canonical: `exp` is reduced until at least one
/// numerator is odd, so equal points compare equal structurally.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicPoint {
    num: [BigInt; 3],
    exp: u32,
}

impl DyadicPoint {
    /// Builds a point and reduces it. Does not check the octahedron constraint.
    pub fn new(num: [BigInt; 3], exp: u32) -> Self {
        let mut p = Self { num, exp };
        p.reduce();
        p
    }

    pub fn from_ints(x: i64, y: i64, z: i64, exp: u32) -> Self {
        Self::new([BigInt::from(x), BigInt::from(y), BigInt::from(z)], exp)
    }

    pub fn unit(axis: usize, sign: i64) -> Self {
        let mut n = [0i64; 3];
        n[axis] = sign;
        Self::from_ints(n[0], n[1], n[2], 0)
    }

    pub fn numerators(&self) -> &[BigInt; 3] {
        &self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    fn reduce(&mut self) {
        while self.exp > 0 && self.num.iter().all(|n| n.is_even()) {
            for n in &mut self.num {
                *n >>= 1;
            }
            self.exp -= 1;
        }
    }

    fn scaled_to(&self, exp: u32) -> [BigInt; 3] {
        let shift = exp - self.exp;
        self.num.clone().map(|n| n << shift)
    }

    /// Exact componentwise average.
    pub fn midpoint(a: &Self, b: &Self) -> Self {
        let e = a.exp.max(b.exp);
        let na = a.scaled_to(e);
        let nb = b.scaled_to(e);
        let [x0, x1, x2] = na;
        let [y0, y1, y2] = nb;
        Self::new([x0 + y0, x1 + y1, x2 + y2], e + 1)
    }

    /// `|x| + |y| + |z| == 1`, checked in integer arithmetic.
    pub fn on_octahedron(&self) -> bool {
        let s: BigInt = self.num.iter().map(|n| n.abs()).sum();
        s == (BigInt::one() << self.exp)
    }

    pub fn is_northern(&self) -> bool {
        !self.num[2].is_negative()
    }

    pub fn to_f64(&self) -> [f64; 3] {
        let scale = (-(self.exp as f64)).exp2();
        self.num
            .clone()
            .map(|n| n.to_f64().unwrap_or(f64::NAN) * scale)
    }

    pub fn coord_sign(&self, axis: usize) -> i8 {
        match self.num[axis].sign() {
            num_bigint::Sign::Minus => -1,
            num_bigint::Sign::NoSign => 0,
            num_bigint::Sign::Plus => 1,
        }
    }
}

fn fmt_coord(f: &mut fmt::Formatter<'_>, n: &BigInt, exp: u32) -> fmt::Result {
    // Reduce per coordinate for readability.
    let mut n = n.clone();
    let mut e = exp;
    while e > 0 && n.is_even() && !n.is_zero() {
        n >>= 1;
        e -= 1;
    }
    if n.is_zero() || e == 0 {
        write!(f, "{n}")
    } else {
        write!(f, "{n}/2^{e}")
    }
}

impl fmt::Display for DyadicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, n) in self.num.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            fmt_coord(f, n, self.exp)?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, thiserror::Error)]
#[error("malformed dyadic point `{0}`")]
pub struct ParseDyadicError(pub String);

fn parse_coord(s: &str) -> Option<(BigInt, u32)> {
    let s = s.trim();
    match s.split_once('/') {
        None => Some((BigInt::from_str(s).ok()?, 0)),
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).ok()?;
            let e = d.trim().strip_prefix("2^")?.parse().ok()?;
            Some((n, e))
        }
    }
}

impl FromStr for DyadicPoint {
    type Err = ParseDyadicError;

    /// Parses the `Display` form, e.g. `(1/2^2, -3/2^2, 0)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseDyadicError(s.to_string());
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(err)?;
        let parts: Vec<_> = inner.split(',').map(parse_coord).collect();
        if parts.len() != 3 {
            return Err(err());
        }
        let parts: Vec<(BigInt, u32)> = parts.into_iter().collect::<Option<_>>().ok_or_else(err)?;
        let e = parts.iter().map(|(_, e)| *e).max().unwrap_or(0);
        let mut num = parts.into_iter().map(|(n, pe)| n << (e - pe));
        let num = [num.next().unwrap(), num.next().unwrap(), num.next().unwrap()];
        Ok(Self::new(num, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_of_axes() {
        let e1 = DyadicPoint::unit(0, 1);
        let e2 = DyadicPoint::unit(1, 1);
        let e3 = DyadicPoint::unit(2, 1);
        let m = DyadicPoint::midpoint(&e1, &e2);
        assert_eq!(m, DyadicPoint::from_ints(1, 1, 0, 1));
        let q = DyadicPoint::midpoint(&m, &e3);
        assert_eq!(q, DyadicPoint::from_ints(1, 1, 2, 2));
        assert_eq!(q.to_f64(), [0.25, 0.25, 0.5]);
        assert!(q.on_octahedron());
    }

    #[test]
    fn midpoint_is_symmetric_and_reduced() {
        let a = DyadicPoint::from_ints(3, -1, 4, 3);
        let b = DyadicPoint::from_ints(1, -1, 2, 2);
        assert_eq!(DyadicPoint::midpoint(&a, &b), DyadicPoint::midpoint(&b, &a));
        let same = DyadicPoint::midpoint(&a, &a);
        assert_eq!(same, a);
    }

    #[test]
    fn deep_midpoints_stay_exact() {
        // Repeated halving toward e3 pushes numerators past 64 bits.
        let e3 = DyadicPoint::unit(2, 1);
        let mut p = DyadicPoint::unit(0, 1);
        for _ in 0..200 {
            p = DyadicPoint::midpoint(&p, &e3);
            assert!(p.on_octahedron());
        }
        assert_eq!(p.exponent(), 200);
    }

    #[test]
    fn display_round_trip() {
        let p = DyadicPoint::from_ints(-3, 1, 4, 3);
        let s = p.to_string();
        assert_eq!(s, "(-3/2^3, 1/2^3, 1/2^1)");
        assert_eq!(s.parse::<DyadicPoint>().unwrap(), p);
        assert!("(1, 2)".parse::<DyadicPoint>().is_err());
    }
}
