//! Tube sets as MPC constraints: one path of sets per leaf branch, held
//! zero-order in time.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mpc::qp::QpBuilder;
use crate::reach::ReachTube;
use crate::setalg::ConstrainedZonotope;

/// Sets seen by one leaf branch. `boundary[k]` encloses the states at
/// `kΔt`; `during[k−1]` encloses every state over `[(k−1)Δt, kΔt]`.
#[derive(Debug, Clone)]
pub struct BranchPath {
    pub branch: usize,
    pub boundary: Vec<ConstrainedZonotope>,
    pub during: Vec<ConstrainedZonotope>,
    /// The branch stopped early; no set exists past its last step.
    pub terminated: bool,
}

#[derive(Debug, Clone)]
pub struct TubeSchedule {
    pub time_step: f64,
    pub paths: Vec<BranchPath>,
}

impl TubeSchedule {
    pub fn from_tube(tube: &ReachTube) -> Result<Self> {
        let mut paths = vec![];
        for leaf in tube.leaves() {
            let steps = tube.branch_path(leaf);
            let mut boundary = vec![tube.initial_set.clone()];
            let mut during = vec![];
            for s in &steps {
                boundary.push(s.set.clone());
                during.push(s.interval_set.clone());
            }
            let terminated = tube
                .branch_lineage(leaf)
                .iter()
                .any(|&b| tube.branches[b].terminated.is_some());
            paths.push(BranchPath {
                branch: leaf,
                boundary,
                during,
                terminated,
            });
        }
        if paths.is_empty() {
            return Err(Error::InvalidArgument("tube has no branches".into()));
        }
        Ok(TubeSchedule {
            time_step: tube.time_step,
            paths,
        })
    }

    /// Set constraining the state at time `t` along `path`: the initial set
    /// at `t = 0`, then the time-interval set of the step covering `t`; held
    /// past the horizon, absent past an early termination.
    pub fn set_at(&self, path: usize, t: f64) -> Option<&ConstrainedZonotope> {
        let p = self.paths.get(path)?;
        if t <= 0.0 {
            return p.boundary.first();
        }
        let k = ((t / self.time_step) - 1e-9).ceil().max(1.0) as usize;
        match p.during.get(k - 1) {
            Some(s) => Some(s),
            None if p.terminated => None,
            None => p.during.last().or(p.boundary.last()),
        }
    }

    /// `‖ξ‖∞ − 1` of `x` in the nearest set at time `t` over all paths;
    /// infinite when no set there contains it at any scale.
    pub fn slack_at(&self, x: &DVector<f64>, t: f64) -> Result<f64> {
        let mut best = f64::INFINITY;
        for p in 0..self.paths.len() {
            if let Some(set) = self.set_at(p, t) {
                if let Some(v) = set.membership_norm(x)? {
                    best = best.min(v - 1.0);
                }
            }
        }
        Ok(best)
    }

    /// The path whose set at `t` contains `x`, nearest center first; when
    /// none does, the nearest center overall (`false` in the flag).
    pub fn select_branch(&self, x: &DVector<f64>, t: f64) -> Result<(usize, bool)> {
        let mut best: Option<(bool, f64, usize)> = None;
        for i in 0..self.paths.len() {
            let Some(set) = self.set_at(i, t) else {
                continue;
            };
            let inside = set.contains_point(x, 1e-9);
            let radius = set.zonotope_part().radius().map(|r| r.max(1e-12));
            let dist = (x - set.center()).component_div(&radius).norm();
            let better = match best {
                None => true,
                Some((bi, bd, _)) => (inside && !bi) || (inside == bi && dist < bd),
            };
            if better {
                best = Some((inside, dist, i));
            }
        }
        best.map(|(inside, _, i)| (i, inside))
            .ok_or_else(|| Error::Solver(format!("no tube set is defined at t = {t}")))
    }
}

/// Lifted exact membership `x = c + Gξ, Aξ = b, ‖ξ‖∞ ≤ 1 + σ` for one step.
#[derive(Debug, Clone, Copy)]
pub struct MembershipBlock<'a> {
    pub set: &'a ConstrainedZonotope,
}

/// The block constraining the state at `t` on the branch selected for the
/// current state `x`.
pub fn tube_membership_constraints<'a>(
    schedule: &'a TubeSchedule,
    x: &DVector<f64>,
    t: f64,
) -> Result<MembershipBlock<'a>> {
    let (path, _) = schedule.select_branch(x, t)?;
    let set = schedule
        .set_at(path, t)
        .ok_or_else(|| Error::Solver(format!("branch has no set at t = {t}")))?;
    Ok(MembershipBlock { set })
}

impl MembershipBlock<'_> {
    pub fn num_coefficients(&self) -> usize {
        self.set.num_generators()
    }

    /// Writes `S⁻¹(x̄ + M·δ − c − Gξ) = 0`, `Aξ = b` and `±ξᵢ − σ ≤ 1`
    /// (`|ξᵢ| ≤ 1` without a slack). `x_bar` is the current iterate,
    /// `sens = (first, M)` maps the variables `first, first + 1, …` to the
    /// state change, `xi` indexes the first coefficient; `scale` normalizes
    /// rows.
    pub(crate) fn add_to(
        &self,
        qp: &mut QpBuilder,
        x_bar: &DVector<f64>,
        scale: &DVector<f64>,
        sens: Option<(usize, &DMatrix<f64>)>,
        xi: usize,
        sigma: Option<usize>,
    ) {
        let g = self.set.generators();
        let c = self.set.center();
        let p = g.ncols();
        for i in 0..g.nrows() {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(p + 1);
            if let Some((first, m)) = sens {
                for j in 0..m.ncols() {
                    if m[(i, j)] != 0.0 {
                        row.push((first + j, m[(i, j)] / scale[i]));
                    }
                }
            }
            for j in 0..p {
                if g[(i, j)] != 0.0 {
                    row.push((xi + j, -g[(i, j)] / scale[i]));
                }
            }
            qp.equality(&row, (c[i] - x_bar[i]) / scale[i]);
        }
        let a = self.set.constraint_matrix();
        let b = self.set.constraint_vector();
        for r in 0..a.nrows() {
            let row: Vec<(usize, f64)> = (0..p).map(|j| (xi + j, a[(r, j)])).collect();
            qp.equality(&row, b[r]);
        }
        for j in 0..p {
            match sigma {
                Some(s) => {
                    qp.less_equal(&[(xi + j, 1.0), (s, -1.0)], 1.0);
                    qp.less_equal(&[(xi + j, -1.0), (s, -1.0)], 1.0);
                }
                None => qp.bounds(xi + j, -1.0, 1.0),
            }
        }
    }

    /// `‖ξ‖∞ − 1` minimized over representations of `x` (negative inside),
    /// from the same lifted rows the controller uses; `None` when `x`
    /// cannot be represented at all.
    pub fn slack(&self, x: &DVector<f64>) -> Result<Option<f64>> {
        let p = self.num_coefficients();
        let scale = DVector::from_element(x.len(), 1.0);
        let mut qp = QpBuilder::new(p + 1);
        qp.q[p] = 1.0;
        self.add_to(&mut qp, x, &scale, None, 0, Some(p));
        qp.bounds(p, -1.0, f64::INFINITY);
        Ok(qp.solve()?.map(|s| s.z[p]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setalg::{Halfspace, IntervalBox, Zonotope};
    use rand::{Rng, SeedableRng};

    #[test]
    fn point_set_pins_the_state() {
        let set: ConstrainedZonotope = Zonotope::point(DVector::from_vec(vec![1.0, 2.0])).into();
        let b = MembershipBlock { set: &set };
        let s = b.slack(&DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert!(s.is_none() || s.unwrap() <= 1e-9);
        assert_eq!(b.slack(&DVector::from_vec(vec![1.0, 2.1])).unwrap(), None);
    }

    #[test]
    fn box_reduces_to_interval_bounds() {
        let b = IntervalBox::new(
            DVector::from_vec(vec![-1.0, 0.0]),
            DVector::from_vec(vec![3.0, 0.5]),
        )
        .unwrap();
        let set: ConstrainedZonotope = Zonotope::from_box(&b).into();
        let blk = MembershipBlock { set: &set };
        // Slack is the largest normalized excursion from the center.
        let s = blk
            .slack(&DVector::from_vec(vec![3.0, 0.25]))
            .unwrap()
            .unwrap();
        assert!(s.abs() < 1e-7);
        let s = blk
            .slack(&DVector::from_vec(vec![5.0, 0.25]))
            .unwrap()
            .unwrap();
        assert!((s - 1.0).abs() < 1e-7);
        let s = blk
            .slack(&DVector::from_vec(vec![1.0, 0.25]))
            .unwrap()
            .unwrap();
        assert!((s + 1.0).abs() < 1e-7);
    }

    #[test]
    fn lifted_block_agrees_with_membership() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let z = Zonotope::new(
            DVector::from_vec(vec![0.5, -0.3]),
            nalgebra::DMatrix::from_row_slice(2, 4, &[1.0, 0.3, -0.5, 0.2, 0.1, 0.8, 0.4, -0.6]),
        )
        .unwrap();
        let h = Halfspace::new(DVector::from_vec(vec![1.0, 1.0]), 0.4).unwrap();
        let set = ConstrainedZonotope::from(z)
            .intersect_halfspace(&h)
            .unwrap();
        let blk = MembershipBlock { set: &set };
        let mut checked = 0;
        for _ in 0..1000 {
            let x = DVector::from_fn(2, |_, _| rng.gen_range(-2.5..2.5));
            let want = set.membership_norm(&x).unwrap();
            let got = blk.slack(&x).unwrap();
            // Skip points within solver accuracy of the boundary.
            if let Some(t) = want {
                if (t - 1.0).abs() < 1e-6 {
                    continue;
                }
            }
            let inside_lifted = got.is_some_and(|s| s <= 0.0);
            assert_eq!(inside_lifted, set.contains_point(&x, 0.0), "x = {x:?}");
            checked += 1;
        }
        assert!(checked > 900);
    }
}
