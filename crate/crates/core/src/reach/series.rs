//! Truncated exponential series of `AΔt` with explicit entry-wise tail
//! bounds, evaluated on a diagonally balanced copy of `A` so that mixed
//! state units (metres next to radians) do not inflate the series norm.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MIN_TERMS: usize = 4;
const MAX_TERMS: usize = 80;
const TAIL_TARGET: f64 = 1e-18;
/// Relative allowance for round-off in the nonnegative series sums.
const SUM_MARGIN: f64 = 1e-12;

/// Matrices of one propagation step. `phi` and `gamma` are point
/// approximations; every other field is an entry-wise upper bound.
#[derive(Debug, Clone)]
pub(crate) struct StepSeries {
    /// `e^{AΔt}`.
    pub phi: DMatrix<f64>,
    /// `∫₀^Δt e^{As} ds`.
    pub gamma: DMatrix<f64>,
    /// Bounds on `|e^{AΔt} − phi|` and `|Γ − gamma|`.
    pub phi_tail: DMatrix<f64>,
    pub gamma_tail: DMatrix<f64>,
    /// `Σⱼ |A|ʲ Δt^{j+1}/(j+1)!`: maps a bound on a forcing term to a bound
    /// on its integrated effect.
    pub forcing: DMatrix<f64>,
    /// `e^{|A|Δt} − I − |A|Δt`: deviation of `e^{At}` from linear
    /// interpolation between `I` and `e^{AΔt}`.
    pub state_bow: DMatrix<f64>,
    /// `forcing − Δt·I`: the same for `∫₀^t e^{As} ds`.
    pub input_bow: DMatrix<f64>,
}

/// Powers of two `d` such that `D⁻¹|A|D` has comparable row and column
/// sums (Osborne's iteration on the off-diagonal part).
pub(crate) fn balance(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut d = DVector::from_element(n, 1.0);
    for _ in 0..64 {
        let mut changed = false;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += (a[(j, i)] * d[i] / d[j]).abs();
                    row += (a[(i, j)] * d[j] / d[i]).abs();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let s = col + row;
            let (mut c, mut r) = (col, row);
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c >= r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if c + r < 0.95 * s {
                d[i] *= f;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    d
}

fn factorial_tail(nu: f64, first: usize) -> f64 {
    // Σ_{j ≥ first} ν^j/j! ≤ ν^first/first! · 1/(1 − ν/(first+1))
    let mut term = 1.0;
    for j in 1..=first {
        term *= nu / j as f64;
    }
    term / (1.0 - nu / (first + 1) as f64)
}

pub(crate) fn step_series(a: &DMatrix<f64>, dt: f64) -> Result<StepSeries> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dim("state matrix columns", n, a.ncols()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state matrix"));
    }
    let d = balance(a);
    let m = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * d[j] / d[i] * dt);
    let m_abs = m.abs();
    let nu = m_abs.row_iter().map(|r| r.sum()).fold(0.0, f64::max);

    let mut q = MIN_TERMS;
    while q < MAX_TERMS && ((q + 2) as f64 <= 2.0 * nu || factorial_tail(nu, q + 1) > TAIL_TARGET) {
        q += 1;
    }
    if (q + 2) as f64 <= 2.0 * nu || factorial_tail(nu, q + 1) > 1e-9 {
        return Err(Error::Reach(format!(
            "state matrix too stiff for the step size (balanced norm {nu:.3e})"
        )));
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let mut phi = eye.clone();
    let mut gam = eye.clone();
    let mut forcing = eye.clone();
    let mut state_bow = DMatrix::zeros(n, n);
    let mut input_bow = DMatrix::zeros(n, n);
    let mut pow = eye.clone();
    let mut pow_abs = eye.clone();
    let mut fact = 1.0;
    for j in 1..=q {
        pow = &pow * &m;
        pow_abs = &pow_abs * &m_abs;
        fact *= j as f64;
        let next = fact * (j + 1) as f64;
        phi += &pow / fact;
        gam += &pow / next;
        forcing += &pow_abs / next;
        input_bow += &pow_abs / next;
        if j >= 2 {
            state_bow += &pow_abs / fact;
        }
    }
    let tail_phi = factorial_tail(nu, q + 1);
    // Σ_{j>q} ν^j/(j+1)! ≤ Σ_{j>q} ν^j/j!.
    let tail_gam = tail_phi;
    let up = 1.0 + SUM_MARGIN;
    let unbalance = |x: &DMatrix<f64>, scale: f64, tail: f64, add_tail: bool| {
        DMatrix::from_fn(n, n, |i, j| {
            let v = if add_tail {
                (x[(i, j)] + tail) * up
            } else {
                x[(i, j)]
            };
            v * scale * d[i] / d[j]
        })
    };
    let tail_matrix = |t: f64, scale: f64| {
        DMatrix::from_fn(n, n, |i, j| (t * scale + SUM_MARGIN * scale) * d[i] / d[j])
    };
    Ok(StepSeries {
        phi: unbalance(&phi, 1.0, 0.0, false),
        gamma: unbalance(&gam, dt, 0.0, false),
        phi_tail: tail_matrix(tail_phi, 1.0),
        gamma_tail: tail_matrix(tail_gam, dt),
        forcing: unbalance(&forcing, dt, tail_gam, true),
        state_bow: unbalance(&state_bow, 1.0, tail_phi, true),
        input_bow: unbalance(&input_bow, dt, tail_gam, true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix() {
        let s = step_series(&DMatrix::zeros(3, 3), 2.0).unwrap();
        assert_eq!(s.phi, DMatrix::identity(3, 3));
        assert_eq!(s.gamma, DMatrix::identity(3, 3) * 2.0);
        assert!((&s.forcing - DMatrix::identity(3, 3) * 2.0).amax() < 1e-10);
        assert!(s.state_bow.amax() < 1e-10);
        assert!(s.input_bow.amax() < 1e-10);
    }

    #[test]
    fn matches_closed_form_rotation_and_decay() {
        // A = [[-a, w], [-w, -a]]: e^{At} = e^{-at}·R(wt).
        let (a, w, dt) = (0.3, 2.0, 0.7);
        let m = DMatrix::from_row_slice(2, 2, &[-a, w, -w, -a]);
        let s = step_series(&m, dt).unwrap();
        let e = (-a * dt).exp();
        let want = DMatrix::from_row_slice(
            2,
            2,
            &[
                e * (w * dt).cos(),
                e * (w * dt).sin(),
                -e * (w * dt).sin(),
                e * (w * dt).cos(),
            ],
        );
        assert!((&s.phi - &want).amax() < 1e-14);
        assert!(s.phi_tail.amax() < 1e-11);
        let expm = (m.clone() * dt).exp();
        assert!((&s.phi - &expm).amax() < 1e-13);
    }

    #[test]
    fn gamma_of_scalar_decay() {
        let s = step_series(&DMatrix::from_element(1, 1, -2.0), 0.5).unwrap();
        let want = (1.0 - (-1.0f64).exp()) / 2.0;
        assert!((s.gamma[(0, 0)] - want).abs() < 1e-15);
        // forcing uses |A|: (e^{1} − 1)/2.
        let f = ((1.0f64).exp() - 1.0) / 2.0;
        assert!(s.forcing[(0, 0)] >= f && s.forcing[(0, 0)] < f + 1e-10);
    }

    #[test]
    fn balancing_mixed_scales() {
        let a =
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 7600.0, 0.0, -0.01, -9.5, 1e-7, 1e-3, 0.0]);
        let d = balance(&a);
        let b = DMatrix::from_fn(3, 3, |i, j| a[(i, j)] * d[j] / d[i]);
        assert!(b.amax() < 0.1 * a.amax());
        assert!(d.iter().all(|v| v.log2().fract() == 0.0));
        let s = step_series(&a, 10.0).unwrap();
        let expm = (a.clone() * 10.0).exp();
        let rel = (&s.phi - &expm).component_div(&expm.map(|v| v.abs().max(1e-300)));
        assert!(rel
            .iter()
            .zip(expm.iter())
            .all(|(r, e)| *e == 0.0 || r.abs() < 1e-9));
    }
}
