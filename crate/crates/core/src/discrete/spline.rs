//! Natural cubic spline basis in truncated-power form.

use crate::error::{Error, Result};
use crate::num::Real;

/// `p`-column natural cubic spline basis evaluated at `x`.
///
/// `x` is rescaled to `[0, 1]`, `p + 1` knots are placed at equally spaced
/// (type-7) quantiles of the rescaled values, the constant column is dropped,
/// and the remaining columns are centered and scaled to unit Euclidean norm.
/// Returns one row per entry of `x`.
pub fn natural_spline_basis<T: Real>(x: &[T], p: usize) -> Result<Vec<Vec<T>>> {
    if p < 1 {
        return Err(Error::InvalidArgument("spline basis needs p >= 1".into()));
    }
    if x.len() <= p {
        return Err(Error::InvalidArgument(format!(
            "spline basis with p = {p} needs more than {p} points, got {}",
            x.len()
        )));
    }
    let lo = x.iter().copied().fold(T::infinity(), T::min);
    let hi = x.iter().copied().fold(T::neg_infinity(), T::max);
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument("spline abscissae must span a finite, non-empty range".into()));
    }
    let u: Vec<T> = x.iter().map(|&v| (v - lo) / (hi - lo)).collect();
    let knots = quantile_knots(&u, p + 1);
    if knots.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("spline knots collapse; use fewer degrees of freedom".into()));
    }
    let mut basis: Vec<Vec<T>> = u.iter().map(|&t| raw_basis(t, &knots)).collect();
    let n = T::from_usize(basis.len()).unwrap();
    for col in 0..p {
        let mean = basis.iter().map(|r| r[col]).sum::<T>() / n;
        basis.iter_mut().for_each(|r| r[col] -= mean);
        let norm = basis.iter().map(|r| r[col] * r[col]).sum::<T>().sqrt();
        if !(norm > T::zero()) {
            return Err(Error::InvalidArgument("spline basis column vanishes".into()));
        }
        basis.iter_mut().for_each(|r| r[col] /= norm);
    }
    Ok(basis)
}

/// Type-7 quantiles of `u` at levels `0, 1/(m-1), …, 1`.
fn quantile_knots<T: Real>(u: &[T], m: usize) -> Vec<T> {
    let mut sorted = u.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    (0..m)
        .map(|i| {
            let h = (n - 1) as f64 * i as f64 / (m - 1) as f64;
            let lo = h.floor() as usize;
            let frac = T::lit(h - lo as f64);
            if lo + 1 < n {
                sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
            } else {
                sorted[n - 1]
            }
        })
        .collect()
}

/// `[t, d_1 − d_{M−1}, …, d_{M−2} − d_{M−1}]` with
/// `d_k(t) = ((t − ξ_k)_+³ − (t − ξ_M)_+³) / (ξ_M − ξ_k)`.
fn raw_basis<T: Real>(t: T, knots: &[T]) -> Vec<T> {
    let m = knots.len();
    let last = knots[m - 1];
    let cube = |v: T| {
        let v = v.max(T::zero());
        v * v * v
    };
    let d = |k: usize| (cube(t - knots[k]) - cube(t - last)) / (last - knots[k]);
    let d_ref = d(m - 2);
    let mut row = Vec::with_capacity(m - 1);
    row.push(t);
    for k in 0..m - 2 {
        row.push(d(k) - d_ref);
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(k: usize) -> Vec<f64> {
        (0..k).map(|i| (i as f64 * 0.37).exp()).collect()
    }

    #[test]
    fn columns_centered_unit_norm() {
        let q = natural_spline_basis(&grid(30), 6).unwrap();
        assert_eq!(q.len(), 30);
        for col in 0..6 {
            let s: f64 = q.iter().map(|r| r[col]).sum();
            let n: f64 = q.iter().map(|r| r[col] * r[col]).sum();
            assert!(s.abs() < 1e-12);
            assert_relative_eq!(n, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn second_derivative_vanishes_at_boundary_knots() {
        let knots = [0.0, 0.2, 0.45, 0.7, 1.0];
        let h = 1e-4;
        let second = |t: f64, c: usize| {
            (raw_basis(t + h, &knots)[c] - 2.0 * raw_basis(t, &knots)[c] + raw_basis(t - h, &knots)[c]) / (h * h)
        };
        for c in 0..4 {
            assert!(second(0.0 + h, c).abs() < 1e-2, "left boundary, column {c}");
            assert!(second(1.0 - h, c).abs() < 1e-2, "right boundary, column {c}");
            // beyond the boundary knots the basis is linear
            assert!(second(1.5, c).abs() < 1e-6);
        }
    }

    #[test]
    fn interpolation_space_has_full_rank() {
        // with as many points as parameters, [1, Q] is square and invertible
        let x = grid(7);
        let q = natural_spline_basis(&x, 6).unwrap();
        let m = nalgebra::DMatrix::from_fn(7, 7, |i, j| if j == 0 { 1.0 } else { q[i][j - 1] });
        let sv = m.singular_values();
        assert!(sv.min() > 1e-8 * sv.max());
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(natural_spline_basis(&grid(5), 5).is_err());
        assert!(natural_spline_basis(&[1.0, 1.0, 1.0], 2).is_err());
    }
}
