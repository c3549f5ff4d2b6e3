//! Scalar abstraction so the jitter solvers run in f64 or in extended
//! binary precision.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

use dashu_base::Abs;
use dashu_float::round::mode::HalfAway;
use dashu_float::FBig;

pub trait Real:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn floor(&self) -> Self;
    fn abs(&self) -> Self;
    fn pi() -> Self;

    fn from_i64(n: i64) -> Self {
        Self::from_f64(n as f64)
    }
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn two_pi() -> Self {
        Self::pi() * Self::from_f64(2.0)
    }
    fn half_pi() -> Self {
        Self::pi() / Self::from_f64(2.0)
    }
    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }
    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
}

/// Working precision of `Big` in bits.
pub const BIG_PRECISION: usize = 512;

type Inner = FBig<HalfAway>;

/// Binary floating point with `BIG_PRECISION` bits of mantissa.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct Big(Inner);

/// atan(1/n) by its alternating series.
fn atan_inv(n: i64) -> Big {
    let x = Big::one() / Big::from_i64(n);
    let x2 = x.clone() * x.clone();
    let eps = Big::wrap(Inner::from_parts(1.into(), -(BIG_PRECISION as isize) - 8));
    let (mut term, mut sum, mut k) = (x.clone(), x, 1i64);
    loop {
        term = -(term * x2.clone());
        let add = term.clone() / Big::from_i64(2 * k + 1);
        if add.abs() < eps {
            return sum;
        }
        sum = sum + add;
        k += 1;
    }
}

/// Machin's formula.
fn pi_big() -> &'static Big {
    static PI: OnceLock<Big> = OnceLock::new();
    PI.get_or_init(|| Big::from_i64(16) * atan_inv(5) - Big::from_i64(4) * atan_inv(239))
}

impl Big {
    fn wrap(x: Inner) -> Self {
        Big(x.with_precision(BIG_PRECISION).value())
    }
}

impl Add for Big {
    type Output = Big;
    fn add(self, o: Big) -> Big {
        Big(self.0 + o.0)
    }
}

impl Sub for Big {
    type Output = Big;
    fn sub(self, o: Big) -> Big {
        Big(self.0 - o.0)
    }
}

impl Mul for Big {
    type Output = Big;
    fn mul(self, o: Big) -> Big {
        Big(self.0 * o.0)
    }
}

impl Div for Big {
    type Output = Big;
    fn div(self, o: Big) -> Big {
        Big(self.0 / o.0)
    }
}

impl Neg for Big {
    type Output = Big;
    fn neg(self) -> Big {
        Big(-self.0)
    }
}

impl Real for Big {
    fn from_f64(x: f64) -> Self {
        Big::wrap(Inner::try_from(x).expect("finite f64"))
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }
    fn floor(&self) -> Self {
        Big::wrap(self.0.floor())
    }
    fn abs(&self) -> Self {
        Big(self.0.clone().abs())
    }
    fn pi() -> Self {
        pi_big().clone()
    }
    fn from_i64(n: i64) -> Self {
        Big::wrap(Inner::from(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn big_arithmetic_beats_f64() {
        let third = Big::one() / Big::from_i64(3);
        let back = third.clone() * Big::from_i64(3) - Big::one();
        assert!(back.abs() < Big::from_f64(1e-100));
        assert!((Big::pi().to_f64() - std::f64::consts::PI).abs() < 1e-16);
        // pi minus its f64 rounding
        let tail = (Big::pi() - Big::from_f64(3.141592653589793)) * Big::from_f64(1e16);
        assert!((tail.to_f64() - 1.2246467991473532).abs() < 1e-15, "{:?}", tail.to_f64());
        assert_eq!(Big::from_f64(2.75).floor().to_f64(), 2.0);
        assert_eq!(Big::from_f64(-2.25).floor().to_f64(), -3.0);
        let tiny = Big::from_f64(1e-30);
        let s = (Big::one() + tiny.clone()) - Big::one();
        assert!((s / tiny - Big::one()).abs() < Big::from_f64(1e-80));
    }
}
