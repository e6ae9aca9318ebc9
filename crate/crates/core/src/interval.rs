//! Closed real intervals with outward rounding.
//!
//! Sums and products are rounded outward only when inexact (detected with
//! error-free transforms), so exact results such as `0 + 0` stay exact. The
//! transcendental functions are widened by a few ulps because the platform
//! `libm` is not correctly rounded.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64, ulps: u32) -> f64 {
    let mut y = x;
    for _ in 0..ulps {
        y = y.next_down();
    }
    y
}

fn up(x: f64, ulps: u32) -> f64 {
    let mut y = x;
    for _ in 0..ulps {
        y = y.next_up();
    }
    y
}

/// Rounding error of `a + b` (Knuth's two-sum); 0 when the sum is exact.
fn sum_error(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

fn add_dir(a: f64, b: f64, upward: bool) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    let e = sum_error(a, b, s);
    match (upward, e) {
        (true, e) if e > 0.0 || e.is_nan() => s.next_up(),
        (false, e) if e < 0.0 || e.is_nan() => s.next_down(),
        _ => s,
    }
}

fn mul_dir(a: f64, b: f64, upward: bool) -> f64 {
    let p = a * b;
    if p.is_nan() || !p.is_finite() || a == 0.0 || b == 0.0 {
        return p;
    }
    // Below this magnitude fma residuals may themselves be rounded.
    if p.abs() < 1e-290 {
        return if upward { p.next_up() } else { p.next_down() };
    }
    let e = a.mul_add(b, -p);
    match (upward, e) {
        (true, e) if e > 0.0 => p.next_up(),
        (false, e) if e < 0.0 => p.next_down(),
        _ => p,
    }
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    /// Panics in debug builds if `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan(), "[{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Symmetric interval `center ± radius`, rounded outward.
    pub fn centered(center: f64, radius: f64) -> Self {
        let r = radius.abs();
        Interval::new(down(center - r, 1), up(center + r, 1))
    }

    fn checked(lo: f64, hi: f64) -> Self {
        if lo.is_nan() || hi.is_nan() {
            return Interval::ENTIRE;
        }
        Interval::new(lo, hi)
    }

    fn outward(lo: f64, hi: f64, ulps: u32) -> Self {
        if lo.is_nan() || hi.is_nan() {
            return Interval::ENTIRE;
        }
        Interval::new(down(lo, ulps), up(hi, ulps))
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            -*self
        } else {
            Interval::new(0.0, self.mag())
        }
    }

    pub fn sqr(&self) -> Interval {
        let a = self.lo * self.lo;
        let b = self.hi * self.hi;
        if self.contains_zero() {
            Interval::new(0.0, up(a.max(b), 1))
        } else {
            let lo = down(a.min(b), 1).max(0.0);
            Interval::new(lo, up(a.max(b), 1))
        }
    }

    pub fn exp(&self) -> Interval {
        let lo = down(self.lo.exp(), 2).max(0.0);
        Interval::new(lo, up(self.hi.exp(), 2))
    }

    pub fn cos(&self) -> Interval {
        if !self.is_finite() || self.width() >= TAU {
            return Interval::new(-1.0, 1.0);
        }
        let k = (self.lo / TAU).floor();
        let a = self.lo - k * TAU;
        let b = a + self.width();
        let (ca, cb) = (self.lo.cos(), self.hi.cos());
        let mut lo = ca.min(cb);
        let mut hi = ca.max(cb);
        // Reduction error in `a` is tiny; a small guard band keeps an
        // extremum that sits right on the boundary from being missed.
        let guard = 1e-12;
        if (a - guard <= PI && PI <= b + guard) || (a - guard <= 3.0 * PI && 3.0 * PI <= b + guard)
        {
            lo = -1.0;
        }
        if a <= guard || (a - guard <= TAU && TAU <= b + guard) {
            hi = 1.0;
        }
        Interval::new(down(lo, 2).max(-1.0), up(hi, 2).min(1.0))
    }

    pub fn sin(&self) -> Interval {
        (*self - Interval::point(FRAC_PI_2)).cos()
    }

    /// Reciprocal; an interval straddling zero maps to the entire real line.
    pub fn recip(&self) -> Interval {
        if self.lo > 0.0 || self.hi < 0.0 {
            Interval::outward(1.0 / self.hi, 1.0 / self.lo, 1)
        } else {
            Interval::ENTIRE
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::checked(
            add_dir(self.lo, rhs.lo, false),
            add_dir(self.hi, rhs.hi, true),
        )
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::checked(
            add_dir(self.lo, -rhs.hi, false),
            add_dir(self.hi, -rhs.lo, true),
        )
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let pairs = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in pairs {
            let (l, h) = (mul_dir(a, b, false), mul_dir(a, b, true));
            if l.is_nan() || h.is_nan() {
                return Interval::ENTIRE;
            }
            lo = lo.min(l);
            hi = hi.max(h);
        }
        Interval::new(lo, hi)
    }
}

impl Div for Interval {
    type Output = Interval;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Interval) -> Interval {
        self * rhs.recip()
    }
}

impl Scalar for Interval {
    fn cst(c: f64) -> Self {
        Interval::point(c)
    }
    fn sin(&self) -> Self {
        Interval::sin(self)
    }
    fn cos(&self) -> Self {
        Interval::cos(self)
    }
    fn exp(&self) -> Self {
        Interval::exp(self)
    }
    fn recip(&self) -> Self {
        Interval::recip(self)
    }
    fn sqr(&self) -> Self {
        Interval::sqr(self)
    }
}
