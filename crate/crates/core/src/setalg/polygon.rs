//! Planar outlines of sets, for plots and tabular export.

use std::f64::consts::TAU;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::setalg::conzono::ConstrainedZonotope;

pub const DEFAULT_ENUMERATION_CAP: usize = 20;
pub const DEFAULT_OUTER_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    /// Unconstrained sets with at most this many generators are projected exactly.
    pub enumeration_cap: usize,
    /// Support directions for the outer polygon.
    pub outer_directions: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            outer_directions: DEFAULT_OUTER_DIRECTIONS,
        }
    }
}

/// Counter-clockwise outline of the projection onto `dims`.
///
/// Unconstrained sets within the enumeration cap get the exact zonotope
/// polygon; everything else gets the outer polygon cut out by support lines
/// in `outer_directions` evenly spaced directions.
pub fn project_vertices_2d(
    z: &ConstrainedZonotope,
    dims: (usize, usize),
    opts: ProjectionOptions,
) -> Result<Vec<[f64; 2]>> {
    let n = z.dim();
    let (i, j) = dims;
    if i == j {
        return Err(Error::InvalidArgument("projection axes must differ".into()));
    }
    for axis in [i, j] {
        if axis >= n {
            return Err(Error::InvalidAxis { axis, dim: n });
        }
    }
    if z.is_unconstrained() && z.num_generators() <= opts.enumeration_cap {
        return Ok(exact_zonotope_polygon(z, dims));
    }
    if z.is_empty()? {
        return Err(Error::EmptySet);
    }
    outer_polygon(z, dims, opts.outer_directions.max(3))
}

fn exact_zonotope_polygon(z: &ConstrainedZonotope, (i, j): (usize, usize)) -> Vec<[f64; 2]> {
    let c = [z.center()[i], z.center()[j]];
    let mut gens: Vec<[f64; 2]> = (0..z.num_generators())
        .map(|k| [z.generators()[(i, k)], z.generators()[(j, k)]])
        .filter(|g| g[0] != 0.0 || g[1] != 0.0)
        .map(|g| {
            // Orient into the upper half-plane.
            if g[1] < 0.0 || (g[1] == 0.0 && g[0] < 0.0) {
                [-g[0], -g[1]]
            } else {
                g
            }
        })
        .collect();
    if gens.is_empty() {
        return vec![c];
    }
    gens.sort_by(|a, b| a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])));
    let mut p = [
        c[0] - gens.iter().map(|g| g[0]).sum::<f64>(),
        c[1] - gens.iter().map(|g| g[1]).sum::<f64>(),
    ];
    let mut out = Vec::with_capacity(2 * gens.len());
    for g in gens.iter().chain(gens.iter()) {
        out.push(p);
        let s = if out.len() <= gens.len() { 2.0 } else { -2.0 };
        p = [p[0] + s * g[0], p[1] + s * g[1]];
    }
    out
}

fn outer_polygon(
    z: &ConstrainedZonotope,
    (i, j): (usize, usize),
    k: usize,
) -> Result<Vec<[f64; 2]>> {
    let n = z.dim();
    let mut lines = Vec::with_capacity(k);
    for s in 0..k {
        let th = TAU * s as f64 / k as f64;
        let (dx, dy) = (th.cos(), th.sin());
        let mut d = DVector::zeros(n);
        d[i] = dx;
        d[j] = dy;
        let h = z.support(&d)?.ok_or(Error::EmptySet)?;
        lines.push((dx, dy, h));
    }
    let mut out = Vec::with_capacity(k);
    for s in 0..k {
        let (a1, b1, h1) = lines[s];
        let (a2, b2, h2) = lines[(s + 1) % k];
        let det = a1 * b2 - a2 * b1;
        out.push([(h1 * b2 - h2 * b1) / det, (a1 * h2 - a2 * h1) / det]);
    }
    Ok(out)
}

/// Shoelace area; positive for counter-clockwise polygons.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|k| {
            let (p, q) = (poly[k], poly[(k + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}
