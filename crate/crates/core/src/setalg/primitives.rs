use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

/// The closed halfspace `{x : normalᵀx ≤ offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    normal: DVector<f64>,
    offset: f64,
}

impl Halfspace {
    pub fn new(normal: DVector<f64>, offset: f64) -> Result<Self> {
        if normal.iter().any(|v| !v.is_finite()) || !offset.is_finite() {
            return Err(Error::NonFinite("halfspace"));
        }
        if normal.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroDirection);
        }
        Ok(Halfspace { normal, offset })
    }

    pub fn normal(&self) -> &DVector<f64> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Signed residual `normalᵀx − offset`; nonpositive inside.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        self.normal.dot(x) - self.offset
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.residual(x) <= 0.0
    }
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl IntervalBox {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("interval box", lower.len(), upper.len()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument(
                "interval box requires lower <= upper".into(),
            ));
        }
        Ok(IntervalBox { lower, upper })
    }

    pub fn from_intervals(ivs: &[Interval]) -> Self {
        IntervalBox {
            lower: DVector::from_iterator(ivs.len(), ivs.iter().map(|i| i.lo)),
            upper: DVector::from_iterator(ivs.len(), ivs.iter().map(|i| i.hi)),
        }
    }

    pub fn point(x: &DVector<f64>) -> Self {
        IntervalBox {
            lower: x.clone(),
            upper: x.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn interval(&self, i: usize) -> Interval {
        Interval::new(self.lower[i], self.upper[i])
    }

    pub fn intervals(&self) -> Vec<Interval> {
        (0..self.dim()).map(|i| self.interval(i)).collect()
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn radius(&self) -> DVector<f64> {
        (&self.upper - &self.lower) * 0.5
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| self.lower[i] <= x[i] && x[i] <= self.upper[i])
    }

    pub fn contains_box(&self, other: &IntervalBox) -> bool {
        other.dim() == self.dim()
            && (0..self.dim())
                .all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i])
    }

    pub fn hull(&self, other: &IntervalBox) -> IntervalBox {
        IntervalBox {
            lower: self.lower.inf(&other.lower),
            upper: self.upper.sup(&other.upper),
        }
    }

    /// Concatenates `self × other`.
    pub fn product(&self, other: &IntervalBox) -> IntervalBox {
        let n = self.dim() + other.dim();
        IntervalBox {
            lower: DVector::from_iterator(n, self.lower.iter().chain(other.lower.iter()).copied()),
            upper: DVector::from_iterator(n, self.upper.iter().chain(other.upper.iter()).copied()),
        }
    }
}
