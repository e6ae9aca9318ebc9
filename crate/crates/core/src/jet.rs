//! Second-order forward-mode derivatives.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to `N` seed variables. Over `f64` it yields exact Jacobians and
//! point Hessians; over [`Interval`](crate::interval::Interval) it yields
//! guaranteed enclosures of the Hessian over a box.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<T, const N: usize> {
    pub value: T,
    pub grad: [T; N],
    pub hess: [[T; N]; N],
}

impl<T: Scalar + Copy, const N: usize> Jet<T, N> {
    pub fn constant(value: T) -> Self {
        let zero = T::cst(0.0);
        Jet {
            value,
            grad: [zero; N],
            hess: [[zero; N]; N],
        }
    }

    /// Seed variable `index` at `value`.
    pub fn variable(value: T, index: usize) -> Self {
        let mut j = Self::constant(value);
        j.grad[index] = T::cst(1.0);
        j
    }

    /// Applies a univariate function given its value and first two derivatives
    /// at `self.value`.
    fn chain(&self, f0: T, f1: T, f2: T) -> Self {
        let mut out = Self::constant(f0);
        for i in 0..N {
            out.grad[i] = f1 * self.grad[i];
        }
        for i in 0..N {
            for j in 0..N {
                out.hess[i][j] = f1 * self.hess[i][j] + f2 * self.grad[i] * self.grad[j];
            }
        }
        out
    }
}

impl<T: Scalar + Copy, const N: usize> Add for Jet<T, N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        out.value = self.value + rhs.value;
        for i in 0..N {
            out.grad[i] = self.grad[i] + rhs.grad[i];
            for j in 0..N {
                out.hess[i][j] = self.hess[i][j] + rhs.hess[i][j];
            }
        }
        out
    }
}

impl<T: Scalar + Copy, const N: usize> Sub for Jet<T, N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<T: Scalar + Copy, const N: usize> Neg for Jet<T, N> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut out = self;
        out.value = -self.value;
        for i in 0..N {
            out.grad[i] = -self.grad[i];
            for j in 0..N {
                out.hess[i][j] = -self.hess[i][j];
            }
        }
        out
    }
}

impl<T: Scalar + Copy, const N: usize> Mul for Jet<T, N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self.value, rhs.value);
        let mut out = Self::constant(a * b);
        for i in 0..N {
            out.grad[i] = a * rhs.grad[i] + b * self.grad[i];
        }
        for i in 0..N {
            for j in 0..N {
                out.hess[i][j] = a * rhs.hess[i][j]
                    + b * self.hess[i][j]
                    + self.grad[i] * rhs.grad[j]
                    + rhs.grad[i] * self.grad[j];
            }
        }
        out
    }
}

impl<T: Scalar + Copy, const N: usize> Div for Jet<T, N> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * Scalar::recip(&rhs)
    }
}

impl<T: Scalar + Copy, const N: usize> Scalar for Jet<T, N> {
    fn cst(c: f64) -> Self {
        Self::constant(T::cst(c))
    }

    fn sin(&self) -> Self {
        let s = self.value.sin();
        self.chain(s, self.value.cos(), -s)
    }

    fn cos(&self) -> Self {
        let c = self.value.cos();
        self.chain(c, -self.value.sin(), -c)
    }

    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    fn recip(&self) -> Self {
        let r = self.value.recip();
        let r2 = r.sqr();
        self.chain(r, -r2, (r2 * r).scale(2.0))
    }

    fn scale(&self, c: f64) -> Self {
        let k = T::cst(c);
        let mut out = *self;
        out.value = self.value * k;
        for i in 0..N {
            out.grad[i] = self.grad[i] * k;
            for j in 0..N {
                out.hess[i][j] = self.hess[i][j] * k;
            }
        }
        out
    }
}
