use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::jet::Jet;
use crate::scalar::Scalar;
use crate::setalg::IntervalBox;

/// Upper bound on `state_dim + input_dim` for derivative evaluation.
pub const MAX_VARS: usize = 8;

type PointJet = Jet<f64, MAX_VARS>;
type BoxJet = Jet<Interval, MAX_VARS>;

/// A smooth autonomous system `ẋ = g(x, u)`, written once over [`Scalar`]
/// so that rates, Jacobians, rate enclosures and Hessian bounds all come
/// from the same expression.
pub trait VectorField: Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;

    fn eval<S: Scalar>(&self, x: &[S], u: &[S]) -> Vec<S>;

    /// Rejects points where `eval` is singular or outside the model's validity.
    fn check_point(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }

    /// Rejects boxes that touch a singular manifold.
    fn check_box(&self, _x: &[Interval]) -> Result<()> {
        Ok(())
    }

    fn rates(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dims(x.len(), u.len())?;
        self.check_point(x.as_slice())?;
        let r = self.eval(x.as_slice(), u.as_slice());
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state rates"));
        }
        Ok(DVector::from_vec(r))
    }

    fn check_dims(&self, nx: usize, nu: usize) -> Result<()> {
        if nx != self.state_dim() {
            return Err(Error::dim("state", self.state_dim(), nx));
        }
        if nu != self.input_dim() {
            return Err(Error::dim("input", self.input_dim(), nu));
        }
        if nx + nu > MAX_VARS {
            return Err(Error::InvalidArgument(format!(
                "at most {MAX_VARS} state and input variables supported"
            )));
        }
        Ok(())
    }

    /// `(∂g/∂x, ∂g/∂u)` at a point, by forward-mode differentiation.
    fn jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let out = self.point_jets(x, u)?;
        let (n, m) = (self.state_dim(), self.input_dim());
        let a = DMatrix::from_fn(n, n, |i, j| out[i].grad[j]);
        let b = DMatrix::from_fn(n, m, |i, j| out[i].grad[n + j]);
        Ok((a, b))
    }

    /// Per-coordinate Hessians over `(x, u)` at a point.
    fn point_hessians(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let out = self.point_jets(x, u)?;
        let k = self.state_dim() + self.input_dim();
        Ok(out
            .iter()
            .map(|jet| DMatrix::from_fn(k, k, |i, j| jet.hess[i][j]))
            .collect())
    }

    #[doc(hidden)]
    fn point_jets(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<Vec<PointJet>> {
        self.check_dims(x.len(), u.len())?;
        self.check_point(x.as_slice())?;
        let n = self.state_dim();
        let xs: Vec<PointJet> = (0..n).map(|i| PointJet::variable(x[i], i)).collect();
        let us: Vec<PointJet> = (0..u.len())
            .map(|i| PointJet::variable(u[i], n + i))
            .collect();
        let out = self.eval(&xs, &us);
        if out
            .iter()
            .any(|j| !j.value.is_finite() || j.grad.iter().any(|g| !g.is_finite()))
        {
            return Err(Error::NonFinite("derivatives"));
        }
        Ok(out)
    }

    /// Interval enclosure of `g` over `xbox × ubox`.
    fn rate_enclosure(&self, xbox: &[Interval], ubox: &[Interval]) -> Result<Vec<Interval>> {
        self.check_dims(xbox.len(), ubox.len())?;
        self.check_box(xbox)?;
        let out = self.eval(xbox, ubox);
        if out.iter().any(|i| !i.is_finite()) {
            return Err(Error::Singularity("unbounded rate enclosure".into()));
        }
        Ok(out)
    }

    /// Entry-wise upper bounds on `|∇²_z gᵢ|` over the box `z = (x, u)`,
    /// one matrix per state coordinate.
    fn hessian_bounds(&self, zbox: &IntervalBox) -> Result<Vec<DMatrix<f64>>> {
        let n = self.state_dim();
        let k = n + self.input_dim();
        if zbox.dim() != k {
            return Err(Error::dim("combined state-input box", k, zbox.dim()));
        }
        self.check_dims(n, k - n)?;
        let ivs = zbox.intervals();
        self.check_box(&ivs[..n])?;
        let xs: Vec<BoxJet> = (0..n).map(|i| BoxJet::variable(ivs[i], i)).collect();
        let us: Vec<BoxJet> = (n..k).map(|i| BoxJet::variable(ivs[i], i)).collect();
        let out = self.eval(&xs, &us);
        let mut bounds = Vec::with_capacity(n);
        for jet in &out {
            let mut h = DMatrix::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    let e = jet.hess[i][j];
                    if !e.is_finite() {
                        return Err(Error::Singularity("unbounded Hessian enclosure".into()));
                    }
                    h[(i, j)] = e.mag();
                }
            }
            bounds.push(h);
        }
        Ok(bounds)
    }
}
