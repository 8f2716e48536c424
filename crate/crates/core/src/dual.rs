//! Forward-mode time derivatives.
//!
//! Device equations are written once, generic over [`Scalar`]. Evaluated with
//! `f64` they give state derivatives; evaluated with [`Dual`] numbers seeded
//! with the time derivatives of their inputs they additionally give the total
//! time derivative of every output, which is how second state derivatives are
//! obtained by the chain rule.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    fn sin_cos(self) -> (Self, Self);
    fn sqrt(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// A value together with its time derivative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub dot: f64,
}

impl Dual {
    #[inline]
    pub const fn new(re: f64, dot: f64) -> Self {
        Self { re, dot }
    }
}

impl Scalar for Dual {
    #[inline]
    fn cst(v: f64) -> Self {
        Self::new(v, 0.0)
    }
    #[inline]
    fn value(self) -> f64 {
        self.re
    }
    #[inline]
    fn sin_cos(self) -> (Self, Self) {
        let (s, c) = self.re.sin_cos();
        (Self::new(s, c * self.dot), Self::new(c, -s * self.dot))
    }
    #[inline]
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        // d/dt sqrt(u) is unbounded at u = 0; the magnitude is pinned there.
        let dot = if r > 0.0 { 0.5 * self.dot / r } else { 0.0 };
        Self::new(r, dot)
    }
}

impl Add for Dual {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.dot + o.dot)
    }
}

impl Sub for Dual {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.dot - o.dot)
    }
}

impl Mul for Dual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.dot * o.re + self.re * o.dot)
    }
}

impl Div for Dual {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Self::new(q, (self.dot - q * o.dot) / o.re)
    }
}

impl Neg for Dual {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.dot)
    }
}

impl Mul<f64> for Dual {
    type Output = Self;
    #[inline]
    fn mul(self, k: f64) -> Self {
        Self::new(self.re * k, self.dot * k)
    }
}

impl Add<f64> for Dual {
    type Output = Self;
    #[inline]
    fn add(self, k: f64) -> Self {
        Self::new(self.re + k, self.dot)
    }
}

impl Sub<f64> for Dual {
    type Output = Self;
    #[inline]
    fn sub(self, k: f64) -> Self {
        Self::new(self.re - k, self.dot)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.re += o.re;
        self.dot += o.dot;
    }
}
