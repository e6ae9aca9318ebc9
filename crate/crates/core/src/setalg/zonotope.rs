use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::setalg::primitives::IntervalBox;

/// `{c + Gξ : |ξ|∞ ≤ 1}`.
///
/// Zero generator columns are kept until [`Zonotope::compact`] is called, so
/// every other operation is an exact transformation of the stored columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
}

pub(crate) fn check_finite(v: impl IntoIterator<Item = f64>, what: &'static str) -> Result<()> {
    if v.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Concatenates matrices with equal row counts side by side.
pub(crate) fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

impl Zonotope {
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self> {
        if generators.nrows() != center.len() {
            return Err(Error::dim(
                "zonotope generators",
                center.len(),
                generators.nrows(),
            ));
        }
        check_finite(center.iter().copied(), "zonotope center")?;
        check_finite(generators.iter().copied(), "zonotope generators")?;
        Ok(Zonotope { center, generators })
    }

    pub fn point(center: DVector<f64>) -> Self {
        let n = center.len();
        Zonotope {
            center,
            generators: DMatrix::zeros(n, 0),
        }
    }

    /// Axis-aligned box as a zonotope with one generator per nonzero radius.
    pub fn from_box(b: &IntervalBox) -> Self {
        let c = b.center();
        let r = b.radius();
        let n = c.len();
        let axes: Vec<usize> = (0..n).filter(|&i| r[i] > 0.0).collect();
        let mut g = DMatrix::zeros(n, axes.len());
        for (k, &i) in axes.iter().enumerate() {
            g[(i, k)] = r[i];
        }
        Zonotope {
            center: c,
            generators: g,
        }
    }

    /// Box `center ± half_widths`, one generator per axis (zeros kept).
    pub fn from_half_widths(center: DVector<f64>, half_widths: &DVector<f64>) -> Result<Self> {
        if center.len() != half_widths.len() {
            return Err(Error::dim("half widths", center.len(), half_widths.len()));
        }
        let g = DMatrix::from_diagonal(&half_widths.abs());
        Zonotope::new(center, g)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn order(&self) -> f64 {
        self.num_generators() as f64 / self.dim().max(1) as f64
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>) {
        (self.center, self.generators)
    }

    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope> {
        if self.dim() != other.dim() {
            return Err(Error::dim("minkowski sum", self.dim(), other.dim()));
        }
        Ok(Zonotope {
            center: &self.center + &other.center,
            generators: hstack(&[&self.generators, &other.generators]),
        })
    }

    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<Zonotope> {
        if m.ncols() != self.dim() {
            return Err(Error::dim("linear map", self.dim(), m.ncols()));
        }
        Ok(Zonotope {
            center: m * &self.center,
            generators: m * &self.generators,
        })
    }

    pub fn translate(&self, v: &DVector<f64>) -> Result<Zonotope> {
        if v.len() != self.dim() {
            return Err(Error::dim("translation", self.dim(), v.len()));
        }
        Ok(Zonotope {
            center: &self.center + v,
            generators: self.generators.clone(),
        })
    }

    /// `max_{x ∈ Z} dᵀx = dᵀc + Σ|dᵀg|`.
    pub fn support(&self, d: &DVector<f64>) -> Result<f64> {
        if d.len() != self.dim() {
            return Err(Error::dim("support direction", self.dim(), d.len()));
        }
        if d.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroDirection);
        }
        let proj = d.transpose() * &self.generators;
        Ok(d.dot(&self.center) + proj.iter().map(|v| v.abs()).sum::<f64>())
    }

    /// Per-axis `Σⱼ |Gᵢⱼ|`.
    pub fn radius(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.generators
                .row_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum()),
        )
    }

    pub fn interval_hull(&self) -> IntervalBox {
        let r = self.radius();
        IntervalBox {
            lower: &self.center - &r,
            upper: &self.center + &r,
        }
    }

    /// Point `c + Gξ`.
    pub fn point_at(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.generators * xi
    }

    /// Removes all-zero generator columns.
    pub fn compact(&self) -> Zonotope {
        let keep: Vec<usize> = (0..self.num_generators())
            .filter(|&j| self.generators.column(j).iter().any(|&v| v != 0.0))
            .collect();
        Zonotope {
            center: self.center.clone(),
            generators: self.generators.select_columns(keep.iter()),
        }
    }

    /// Girard-style outer reduction to at most `⌊max_order·n⌋` generators.
    ///
    /// Generators are scored by `‖g‖₁ − ‖g‖∞`; the lowest-scoring ones are
    /// replaced by their axis-aligned box enclosure.
    pub fn reduce_order(&self, max_order: f64) -> Zonotope {
        let target = ((max_order.max(1.0)) * self.dim() as f64).floor() as usize;
        let (c, g) = reduce_generators(&self.center, &self.generators, target);
        Zonotope {
            center: c,
            generators: g,
        }
    }

    /// Splits perpendicular to `axis` through the center.
    ///
    /// The parent is first enclosed by decoupling the axis into one dedicated
    /// generator of length `Σⱼ|G_axis,j|` (the other rows are untouched), and
    /// that generator is then halved. The union of the children is the
    /// decoupled enclosure, which contains the parent; each child's hull
    /// width along `axis` is exactly half the parent's.
    pub fn split(&self, axis: usize) -> Result<(Zonotope, Zonotope)> {
        let n = self.dim();
        if axis >= n {
            return Err(Error::InvalidAxis { axis, dim: n });
        }
        let r = self.radius()[axis];
        let mut g = self.generators.clone();
        g.row_mut(axis).fill(0.0);
        let mut e = DMatrix::zeros(n, 1);
        e[(axis, 0)] = 0.5 * r;
        let g = hstack(&[&g, &e]);
        let mut lo = self.center.clone();
        lo[axis] -= 0.5 * r;
        let mut hi = self.center.clone();
        hi[axis] += 0.5 * r;
        Ok((
            Zonotope {
                center: lo,
                generators: g.clone(),
            },
            Zonotope {
                center: hi,
                generators: g,
            },
        ))
    }
}

/// Reduces `(c, G)` in place of its dimension `d = c.len()` to at most
/// `target ≥ d` columns; returns the input unchanged if already small enough.
pub(crate) fn reduce_generators(
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    target: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let d = c.len();
    let p = g.ncols();
    if p <= target || target < d {
        return (c.clone(), g.clone());
    }
    let keep = target - d;
    let mut scored: Vec<(f64, usize)> = (0..p)
        .map(|j| {
            let col = g.column(j);
            let l1: f64 = col.iter().map(|v| v.abs()).sum();
            (l1 - col.amax(), j)
        })
        .collect();
    // Highest score first; equal scores keep their original order.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut kept: Vec<usize> = scored[..keep].iter().map(|&(_, j)| j).collect();
    kept.sort_unstable();
    let mut radius = DVector::zeros(d);
    for &(_, j) in &scored[keep..] {
        radius += g.column(j).abs();
    }
    let mut out = DMatrix::zeros(d, keep + d);
    for (k, &j) in kept.iter().enumerate() {
        out.set_column(k, &g.column(j));
    }
    for i in 0..d {
        out[(i, keep + i)] = radius[i];
    }
    (c.clone(), out)
}
