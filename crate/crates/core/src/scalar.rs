//! Numeric abstraction shared by plain floats, intervals and derivative jets,
//! so the equations of motion are written once and evaluated in every mode.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(c: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn recip(&self) -> Self;

    fn sqr(&self) -> Self {
        self.clone() * self.clone()
    }

    fn scale(&self, c: f64) -> Self {
        self.clone() * Self::cst(c)
    }
}

impl Scalar for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
    fn sqr(&self) -> Self {
        self * self
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
}
