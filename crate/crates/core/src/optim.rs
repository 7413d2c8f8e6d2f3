//! BFGS minimizer with Armijo backtracking.

use nalgebra::{DMatrix, DVector};

use crate::num::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOptions<T> {
    /// Stop when `‖∇f‖_∞ ≤ gtol · max(1, |f|)`.
    pub gtol: T,
    /// Stop when an accepted step changes `f` by at most `ftol · max(1, |f|)`.
    pub ftol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for BfgsOptions<T> {
    fn default() -> Self {
        Self { gtol: T::lit(1e-8), ftol: T::lit(1e-13), max_iter: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting at `x0`.
    pub trace: Vec<T>,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn inf_norm<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Minimize `f`; `fg(x)` returns `(f(x), ∇f(x))`.
pub fn bfgs<T: Real, F>(mut fg: F, x0: Vec<T>, opts: &BfgsOptions<T>) -> BfgsResult<T>
where
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = fg(&x);
    let mut trace = vec![f];
    // inverse Hessian approximation, row-major
    let mut h = vec![T::zero(); n * n];
    for i in 0..n {
        h[i * n + i] = T::one();
    }
    let mut first = true;
    let c1 = T::lit(1e-4);
    let half = T::lit(0.5);
    let mut iterations = 0;
    let mut converged = false;
    let scale = |f: T| f.abs().max(T::one());

    while iterations < opts.max_iter {
        if inf_norm(&g) <= opts.gtol * scale(f) {
            converged = true;
            break;
        }
        let mut dir: Vec<T> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&dir, &g);
        if !(slope < T::zero()) {
            // lost descent: restart from steepest descent
            reset(&mut h, n);
            dir = g.iter().map(|&v| -v).collect();
            slope = dot(&dir, &g);
            first = true;
        }
        let mut step = if first { T::one() / inf_norm(&g).max(T::one()) } else { T::one() };
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<T> = x.iter().zip(&dir).map(|(&a, &d)| a + step * d).collect();
            let (fnew, gnew) = fg(&xn);
            if fnew.is_finite() && fnew <= f + c1 * step * slope {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            step *= half;
        }
        iterations += 1;
        let Some((xn, fnew, gnew)) = accepted else {
            if first {
                break;
            }
            reset(&mut h, n);
            first = true;
            continue;
        };
        let s: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gnew.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let df = (f - fnew).abs();
        x = xn;
        f = fnew;
        g = gnew;
        trace.push(f);
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first {
                let gamma = sy / dot(&y, &y);
                for v in h.iter_mut() {
                    *v *= gamma;
                }
                first = false;
            }
            update_inverse(&mut h, &s, &y, sy);
        }
        if df <= opts.ftol * scale(f) {
            converged = inf_norm(&g) <= opts.gtol.sqrt() * scale(f);
            if converged {
                break;
            }
        }
    }
    BfgsResult { x, value: f, gradient: g, iterations, converged, trace }
}

fn reset<T: Real>(h: &mut [T], n: usize) {
    h.iter_mut().for_each(|v| *v = T::zero());
    for i in 0..n {
        h[i * n + i] = T::one();
    }
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`, `ρ = 1 / yᵀs`.
fn update_inverse<T: Real>(h: &mut [T], s: &[T], y: &[T], sy: T) {
    let n = s.len();
    let rho = sy.recip();
    let hy: Vec<T> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    let coef = (T::one() + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Nonnegative least squares `min ‖Ax − b‖, x ≥ 0` (Lawson–Hanson active set).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())) * b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE) * a.nrows() as f64;
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let solve = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let ap = a.select_columns(&idx);
        let sp = ap.svd(true, true).solve(b, 1e-13).expect("svd solve");
        let mut s = DVector::zeros(n);
        for (m, &j) in idx.iter().enumerate() {
            s[j] = sp[m];
        }
        s
    };
    for _ in 0..3 * n.max(1) {
        let w = a.tr_mul(&(b - a * &x));
        let cand = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = cand else { break };
        passive[j] = true;
        for _ in 0..3 * n.max(1) {
            let s = solve(&passive);
            if (0..n).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let mut step = 1.0f64;
            let mut blocking = j;
            for i in (0..n).filter(|&i| passive[i] && s[i] <= 0.0) {
                let t = x[i] / (x[i] - s[i]);
                if t < step {
                    step = t;
                    blocking = i;
                }
            }
            x += (s - &x) * step;
            x[blocking] = 0.0;
            for i in 0..n {
                if passive[i] && x[i] <= 0.0 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}
