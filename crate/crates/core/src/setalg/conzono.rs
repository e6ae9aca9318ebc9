use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::setalg::lp::{self, Equalities};
use crate::setalg::primitives::{Halfspace, IntervalBox};
use crate::setalg::zonotope::{check_finite, hstack, reduce_generators, Zonotope};

/// Default tolerance on `|ξ|∞ ≤ 1` for emptiness and membership decisions.
pub const DEFAULT_XI_TOL: f64 = 1e-9;

/// How [`ConstrainedZonotope::interval_hull_with`] bounds each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HullMethod {
    /// `2n` linear programs over the feasible ξ-set; tight.
    #[default]
    Exact,
    /// Drops `Aξ = b` and uses the zonotope hull; a sound outer bound.
    IgnoreConstraints,
}

/// `{c + Gξ : |ξ|∞ ≤ 1, Aξ = b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedZonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
    constraint_matrix: DMatrix<f64>,
    constraint_vector: DVector<f64>,
}

impl From<Zonotope> for ConstrainedZonotope {
    fn from(z: Zonotope) -> Self {
        let (center, generators) = z.into_parts();
        let p = generators.ncols();
        ConstrainedZonotope {
            center,
            generators,
            constraint_matrix: DMatrix::zeros(0, p),
            constraint_vector: DVector::zeros(0),
        }
    }
}

impl ConstrainedZonotope {
    pub fn new(
        center: DVector<f64>,
        generators: DMatrix<f64>,
        constraint_matrix: DMatrix<f64>,
        constraint_vector: DVector<f64>,
    ) -> Result<Self> {
        let n = center.len();
        if generators.nrows() != n {
            return Err(Error::dim(
                "constrained zonotope generators",
                n,
                generators.nrows(),
            ));
        }
        if constraint_matrix.ncols() != generators.ncols() {
            return Err(Error::dim(
                "constraint matrix columns",
                generators.ncols(),
                constraint_matrix.ncols(),
            ));
        }
        if constraint_matrix.nrows() != constraint_vector.len() {
            return Err(Error::dim(
                "constraint vector",
                constraint_matrix.nrows(),
                constraint_vector.len(),
            ));
        }
        check_finite(center.iter().copied(), "center")?;
        check_finite(generators.iter().copied(), "generators")?;
        check_finite(constraint_matrix.iter().copied(), "constraint matrix")?;
        check_finite(constraint_vector.iter().copied(), "constraint vector")?;
        Ok(ConstrainedZonotope {
            center,
            generators,
            constraint_matrix,
            constraint_vector,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_matrix.nrows()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.constraint_matrix
    }

    pub fn constraint_vector(&self) -> &DVector<f64> {
        &self.constraint_vector
    }

    /// The generator part with the constraints dropped (an outer bound).
    pub fn zonotope_part(&self) -> Zonotope {
        Zonotope::new(self.center.clone(), self.generators.clone())
            .expect("dimensions were validated on construction")
    }

    pub fn is_unconstrained(&self) -> bool {
        self.num_constraints() == 0
    }

    fn constraint_block(&self) -> Equalities<'_> {
        Equalities {
            rows: &self.constraint_matrix,
            rhs: &self.constraint_vector,
        }
    }

    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<ConstrainedZonotope> {
        if m.ncols() != self.dim() {
            return Err(Error::dim("linear map", self.dim(), m.ncols()));
        }
        Ok(ConstrainedZonotope {
            center: m * &self.center,
            generators: m * &self.generators,
            constraint_matrix: self.constraint_matrix.clone(),
            constraint_vector: self.constraint_vector.clone(),
        })
    }

    pub fn translate(&self, v: &DVector<f64>) -> Result<ConstrainedZonotope> {
        if v.len() != self.dim() {
            return Err(Error::dim("translation", self.dim(), v.len()));
        }
        let mut out = self.clone();
        out.center += v;
        Ok(out)
    }

    /// `self ⊕ z`; the new generators are unconstrained.
    pub fn minkowski_sum_zonotope(&self, z: &Zonotope) -> Result<ConstrainedZonotope> {
        if z.dim() != self.dim() {
            return Err(Error::dim("minkowski sum", self.dim(), z.dim()));
        }
        let m = self.num_constraints();
        let a = hstack(&[
            &self.constraint_matrix,
            &DMatrix::zeros(m, z.num_generators()),
        ]);
        Ok(ConstrainedZonotope {
            center: &self.center + z.center(),
            generators: hstack(&[&self.generators, z.generators()]),
            constraint_matrix: a,
            constraint_vector: self.constraint_vector.clone(),
        })
    }

    /// `self ⊕ other` with block-diagonal constraints.
    pub fn minkowski_sum(&self, other: &ConstrainedZonotope) -> Result<ConstrainedZonotope> {
        if other.dim() != self.dim() {
            return Err(Error::dim("minkowski sum", self.dim(), other.dim()));
        }
        let (m1, p1) = self.constraint_matrix.shape();
        let (m2, p2) = other.constraint_matrix.shape();
        let mut a = DMatrix::zeros(m1 + m2, p1 + p2);
        a.view_mut((0, 0), (m1, p1))
            .copy_from(&self.constraint_matrix);
        a.view_mut((m1, p1), (m2, p2))
            .copy_from(&other.constraint_matrix);
        let b = DVector::from_iterator(
            m1 + m2,
            self.constraint_vector
                .iter()
                .chain(other.constraint_vector.iter())
                .copied(),
        );
        Ok(ConstrainedZonotope {
            center: &self.center + &other.center,
            generators: hstack(&[&self.generators, &other.generators]),
            constraint_matrix: a,
            constraint_vector: b,
        })
    }

    /// Feasibility of `{|ξ|∞ ≤ 1 + tol, Aξ = b}`.
    pub fn is_empty_with(&self, tol: f64) -> Result<bool> {
        if self.num_constraints() == 0 {
            return Ok(false);
        }
        let p = self.num_generators();
        let zeros = vec![0.0; p];
        Ok(lp::minimize(&zeros, 1.0 + tol, &[self.constraint_block()])?.is_none())
    }

    pub fn is_empty(&self) -> Result<bool> {
        self.is_empty_with(DEFAULT_XI_TOL)
    }

    /// Smallest `t` such that `x = c + Gξ`, `Aξ = b`, `|ξ|∞ ≤ t` is
    /// solvable; `None` when no such ξ exists at any scale.
    pub fn membership_norm(&self, x: &DVector<f64>) -> Result<Option<f64>> {
        if x.len() != self.dim() {
            return Err(Error::dim("membership point", self.dim(), x.len()));
        }
        let rhs = x - &self.center;
        let p = self.num_generators();
        if p == 0 {
            let scale = x.amax().max(self.center.amax()).max(1.0);
            let ok = rhs.amax() <= DEFAULT_XI_TOL * scale
                && self.constraint_vector.amax() <= DEFAULT_XI_TOL;
            return Ok(ok.then_some(0.0));
        }
        let blocks = [
            Equalities {
                rows: &self.generators,
                rhs: &rhs,
            },
            self.constraint_block(),
        ];
        Ok(lp::min_inf_norm(p, &blocks)?.map(|(t, _)| t))
    }

    /// True iff `x` is in the set with `|ξ|∞` relaxed to `1 + slack`.
    /// Empty sets contain nothing; a failed solve counts as not contained.
    pub fn contains_point(&self, x: &DVector<f64>, slack: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self.membership_norm(x) {
            Ok(Some(t)) => t <= 1.0 + slack,
            _ => false,
        }
    }

    /// `max dᵀx` over the set; `None` when empty.
    pub fn support(&self, d: &DVector<f64>) -> Result<Option<f64>> {
        if d.len() != self.dim() {
            return Err(Error::dim("support direction", self.dim(), d.len()));
        }
        if d.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroDirection);
        }
        if self.is_unconstrained() {
            return self.zonotope_part().support(d).map(Some);
        }
        let cost: Vec<f64> = (d.transpose() * &self.generators)
            .iter()
            .map(|v| -v)
            .collect();
        Ok(lp::minimize(&cost, 1.0, &[self.constraint_block()])?
            .map(|(obj, _)| d.dot(&self.center) - obj))
    }

    pub fn interval_hull(&self) -> Result<IntervalBox> {
        self.interval_hull_with(HullMethod::Exact)
    }

    pub fn interval_hull_with(&self, method: HullMethod) -> Result<IntervalBox> {
        if self.is_unconstrained() || method == HullMethod::IgnoreConstraints {
            if !self.is_unconstrained() && self.is_empty()? {
                return Err(Error::EmptySet);
            }
            return Ok(self.zonotope_part().interval_hull());
        }
        let n = self.dim();
        let mut lower = self.center.clone();
        let mut upper = self.center.clone();
        for i in 0..n {
            let row: Vec<f64> = self.generators.row(i).iter().copied().collect();
            if row.iter().all(|&v| v == 0.0) {
                if self.is_empty()? {
                    return Err(Error::EmptySet);
                }
                continue;
            }
            let lo = lp::minimize(&row, 1.0, &[self.constraint_block()])?.ok_or(Error::EmptySet)?;
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            let hi = lp::minimize(&neg, 1.0, &[self.constraint_block()])?.ok_or(Error::EmptySet)?;
            lower[i] = self.center[i] + lo.0;
            upper[i] = self.center[i] - hi.0;
            if lower[i] > upper[i] {
                // LP round-off on a degenerate axis.
                let m = 0.5 * (lower[i] + upper[i]);
                lower[i] = m;
                upper[i] = m;
            }
        }
        Ok(IntervalBox { lower, upper })
    }

    /// Exact intersection with `{x : hᵀx ≤ f}`.
    ///
    /// A non-binding halfspace returns the input unchanged. Otherwise one
    /// slack generator and one constraint row are appended so that
    /// `hᵀx = f − s_max(1 + ξ_s)/2` sweeps exactly `[f − s_max, f]`.
    pub fn intersect_halfspace(&self, h: &Halfspace) -> Result<ConstrainedZonotope> {
        if h.dim() != self.dim() {
            return Err(Error::dim("halfspace", self.dim(), h.dim()));
        }
        let hg = h.normal().transpose() * &self.generators;
        let hc = h.normal().dot(&self.center);
        let spread: f64 = hg.iter().map(|v| v.abs()).sum();
        if hc + spread <= h.offset() {
            return Ok(self.clone());
        }
        let s_max = h.offset() - hc + spread;
        let n = self.dim();
        // s_max < 0 means the halfspace misses the set entirely; encode that
        // as the unsatisfiable slack row `σ = 2`.
        let (slack_coef, rhs, hg) = if s_max < 0.0 {
            (1.0, 2.0, nalgebra::RowDVector::zeros(hg.ncols()))
        } else {
            (0.5 * s_max, h.offset() - hc - 0.5 * s_max, hg)
        };
        let (m, p) = self.constraint_matrix.shape();
        let generators = hstack(&[&self.generators, &DMatrix::zeros(n, 1)]);
        let mut a = DMatrix::zeros(m + 1, p + 1);
        a.view_mut((0, 0), (m, p))
            .copy_from(&self.constraint_matrix);
        for j in 0..p {
            a[(m, j)] = hg[j];
        }
        a[(m, p)] = slack_coef;
        let mut b = self.constraint_vector.clone().resize_vertically(m + 1, 0.0);
        b[m] = rhs;
        Ok(ConstrainedZonotope {
            center: self.center.clone(),
            generators,
            constraint_matrix: a,
            constraint_vector: b,
        })
    }

    /// Removes one constraint by solving it for one coefficient.
    ///
    /// The eliminated coefficient loses its `|ξ_j| ≤ 1` bound, so the result
    /// contains the input. The pivot minimizes the implied range of the
    /// eliminated coefficient (a range ≤ 1 makes the elimination exact).
    pub fn eliminate_constraint(&self) -> ConstrainedZonotope {
        let (m, p) = self.constraint_matrix.shape();
        if m == 0 {
            return self.clone();
        }
        let a = &self.constraint_matrix;
        let b = &self.constraint_vector;
        let mut best: Option<(f64, usize, usize)> = None;
        for r in 0..m {
            let row_abs: f64 = a.row(r).iter().map(|v| v.abs()).sum();
            for j in 0..p {
                let piv = a[(r, j)].abs();
                if piv == 0.0 {
                    continue;
                }
                let range = (b[r].abs() + row_abs - piv) / piv;
                if best.is_none_or(|(s, _, _)| range < s) {
                    best = Some((range, r, j));
                }
            }
        }
        let Some((_, r, j)) = best else {
            // All-zero rows: either trivially satisfied or the set is empty;
            // dropping them is an outer approximation either way.
            return ConstrainedZonotope {
                center: self.center.clone(),
                generators: self.generators.clone(),
                constraint_matrix: DMatrix::zeros(0, p),
                constraint_vector: DVector::zeros(0),
            };
        };
        let piv = a[(r, j)];
        let arow = a.row(r).clone_owned() / piv;
        let br = b[r] / piv;
        let gj = self.generators.column(j).clone_owned();
        let g = &self.generators - &gj * &arow;
        let c = &self.center + &gj * br;
        let aj = a.column(j).clone_owned();
        let a_new = a - &aj * &arow;
        let b_new = b - &aj * br;
        let rows: Vec<usize> = (0..m).filter(|&s| s != r).collect();
        let cols: Vec<usize> = (0..p).filter(|&k| k != j).collect();
        ConstrainedZonotope {
            center: c,
            generators: g.select_columns(cols.iter()),
            constraint_matrix: a_new.select_rows(rows.iter()).select_columns(cols.iter()),
            constraint_vector: b_new.select_rows(rows.iter()),
        }
    }

    /// Outer reduction to at most `⌊max_order·n⌋` generators.
    ///
    /// Constraints are eliminated until the lifted dimension `n + m` fits the
    /// budget; then the lifted zonotope `([G; A], [c; −b])` is reduced with
    /// the same scoring as [`Zonotope::reduce_order`] and split back into
    /// generator and constraint rows.
    pub fn reduce_order(&self, max_order: f64) -> ConstrainedZonotope {
        let n = self.dim();
        let target = (max_order.max(1.0) * n as f64).floor() as usize;
        if self.num_generators() <= target {
            return self.clone();
        }
        let mut z = self.clone();
        while z.num_constraints() > 0 && n + z.num_constraints() > target {
            z = z.eliminate_constraint();
        }
        if z.num_generators() <= target {
            return z;
        }
        let m = z.num_constraints();
        if m == 0 {
            let (c, g) = reduce_generators(&z.center, &z.generators, target);
            return ConstrainedZonotope {
                center: c,
                constraint_matrix: DMatrix::zeros(0, g.ncols()),
                generators: g,
                constraint_vector: DVector::zeros(0),
            };
        }
        let p = z.num_generators();
        let mut lifted = DMatrix::zeros(n + m, p);
        lifted.view_mut((0, 0), (n, p)).copy_from(&z.generators);
        lifted
            .view_mut((n, 0), (m, p))
            .copy_from(&z.constraint_matrix);
        let lifted_c = DVector::from_iterator(
            n + m,
            z.center
                .iter()
                .copied()
                .chain(z.constraint_vector.iter().map(|v| -v)),
        );
        let (lc, lg) = reduce_generators(&lifted_c, &lifted, target);
        let q = lg.ncols();
        ConstrainedZonotope {
            center: lc.rows(0, n).into_owned(),
            generators: lg.view((0, 0), (n, q)).into_owned(),
            constraint_matrix: lg.view((n, 0), (m, q)).into_owned(),
            constraint_vector: -lc.rows(n, m).into_owned(),
        }
    }

    /// Splits at `value` on `axis` into `{x_axis ≤ value}` and
    /// `{x_axis ≥ value}`; exact.
    pub fn split_at(
        &self,
        axis: usize,
        value: f64,
    ) -> Result<(ConstrainedZonotope, ConstrainedZonotope)> {
        let n = self.dim();
        if axis >= n {
            return Err(Error::InvalidAxis { axis, dim: n });
        }
        let mut e = DVector::zeros(n);
        e[axis] = 1.0;
        let lower = self.intersect_halfspace(&Halfspace::new(e.clone(), value)?)?;
        let upper = self.intersect_halfspace(&Halfspace::new(-e, -value)?)?;
        Ok((lower, upper))
    }

    /// A feasible coefficient vector, if any.
    pub fn feasible_coefficients(&self) -> Result<Option<DVector<f64>>> {
        let p = self.num_generators();
        if self.is_unconstrained() {
            return Ok(Some(DVector::zeros(p)));
        }
        Ok(
            lp::minimize(&vec![0.0; p], 1.0, &[self.constraint_block()])?
                .map(|(_, xi)| DVector::from_vec(xi)),
        )
    }

    pub fn point_at(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.generators * xi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn unit_box() -> ConstrainedZonotope {
        Zonotope::new(v(&[0.0, 0.0]), DMatrix::identity(2, 2))
            .unwrap()
            .into()
    }

    fn hs(n: &[f64], f: f64) -> Halfspace {
        Halfspace::new(v(n), f).unwrap()
    }

    #[test]
    fn nonbinding_halfspace_is_identity() {
        let b = unit_box();
        assert_eq!(b.intersect_halfspace(&hs(&[1.0, 0.0], 2.0)).unwrap(), b);
    }

    #[test]
    fn binding_halfspace_cuts_hull() {
        let cut = unit_box()
            .intersect_halfspace(&hs(&[1.0, 0.0], 0.0))
            .unwrap();
        assert_eq!(cut.num_constraints(), 1);
        let h = cut.interval_hull().unwrap();
        assert!((h.lower[0] + 1.0).abs() < 1e-9);
        assert!(h.upper[0].abs() < 1e-9);
        assert!((h.lower[1] + 1.0).abs() < 1e-9);
        assert!((h.upper[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_halfspace_is_empty() {
        let cut = unit_box()
            .intersect_halfspace(&hs(&[1.0, 0.0], -2.0))
            .unwrap();
        assert!(cut.is_empty().unwrap());
        assert!(matches!(cut.interval_hull(), Err(Error::EmptySet)));
        assert!(!cut.contains_point(&v(&[0.0, 0.0]), 1e-9));
    }

    #[test]
    fn emptiness_cases() {
        assert!(!unit_box().is_empty().unwrap());
        let z = ConstrainedZonotope::new(
            v(&[0.0, 0.0]),
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            v(&[2.0]),
        )
        .unwrap();
        assert!(z.is_empty().unwrap());
    }

    #[test]
    fn face_constraint_collapses_hull() {
        let z = ConstrainedZonotope::new(
            v(&[0.0, 0.0]),
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            v(&[1.0]),
        )
        .unwrap();
        let h = z.interval_hull().unwrap();
        assert!((h.lower[0] - 1.0).abs() < 1e-12 && (h.upper[0] - 1.0).abs() < 1e-12);
        let loose = z.interval_hull_with(HullMethod::IgnoreConstraints).unwrap();
        assert!(loose.contains_box(&h));
    }

    #[test]
    fn membership_basics() {
        let b = unit_box();
        assert!(b.contains_point(&v(&[0.0, 0.0]), 0.0));
        assert!(b.contains_point(&v(&[1.0, -1.0]), 1e-9));
        assert!(!b.contains_point(&v(&[1.5, 0.0]), 1e-9));
        let p: ConstrainedZonotope = Zonotope::point(v(&[1.0, 2.0])).into();
        assert!(p.contains_point(&v(&[1.0, 2.0]), 1e-9));
        assert!(!p.contains_point(&v(&[1.0, 2.1]), 1e-9));
    }

    #[test]
    fn elimination_contains_input() {
        let cut = unit_box()
            .intersect_halfspace(&hs(&[1.0, 1.0], 0.5))
            .unwrap();
        let e = cut.eliminate_constraint();
        assert_eq!(e.num_constraints(), 0);
        let (hc, he) = (cut.interval_hull().unwrap(), e.interval_hull().unwrap());
        assert!(he.contains_box(&hc));
    }

    #[test]
    fn split_halves_cover() {
        let (a, b) = unit_box().split_at(0, 0.0).unwrap();
        let ha = a.interval_hull().unwrap();
        let hb = b.interval_hull().unwrap();
        assert!(ha.upper[0].abs() < 1e-9 && hb.lower[0].abs() < 1e-9);
    }
}
