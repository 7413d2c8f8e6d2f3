use serde::{Deserialize, Serialize};

use super::{DiscretePrior, Likelihood};
use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::fit::{Diagnostics, FitResult, ModelKind, PriorModel};
use crate::num::Real;
use crate::optim::nnls;
use crate::tables::{ContingencyTable, ExpectedCounts};

/// Masses at or below this are reported as empty support points.
const EMPTY_MASS: f64 = 1e-10;
/// Relative objective change below which EM hands over to Newton steps.
const POLISH_SWITCH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KmOptions<T> {
    /// Relative objective change that stops the fixed point.
    pub tol: T,
    pub max_iter: usize,
    /// Required bound on `max_k (1/n) Σ_c L_ck / p̂_c − 1`.
    pub kkt_tol: T,
}

impl<T: Real> Default for KmOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-10), max_iter: 20_000, kkt_tol: T::lit(1e-6) }
    }
}

/// Nonparametric MLE of masses on a fixed support (multiplicative EM).
///
/// Iterates `g_k ← g_k · d_k` with `d_k = (1/n) Σ_c L_ck / Σ_m g_m L_cm` from the
/// uniform start, accelerated by squared extrapolation (SQUAREM) with a
/// fallback to the plain double step whenever the extrapolated point does worse,
/// so the objective never decreases. Stops once the relative objective change is below `tol` and the
/// KKT certificate `max_k d_k ≤ 1 + kkt_tol` holds, or at `max_iter`. EM crawls
/// along flat directions among nearly collinear support points, so once its
/// progress drops below 1e-6 relative, constrained Newton steps take over: an
/// NNLS fit of the local quadratic model gives a direction, then an Armijo search.
pub fn km_fit<T: Real>(
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    support: &[T],
    opts: &KmOptions<T>,
) -> Result<FitResult<T>> {
    let lik = Likelihood::new(table, e, support)?;
    let (n, k) = (lik.n_cells, lik.k);
    let inv_n = T::from_usize(n).unwrap().recip();
    let mut g = vec![T::from_usize(k).unwrap().recip(); k];
    let mut d = vec![T::zero(); k];
    let offset: T = lik.offset.iter().copied().sum();

    // one pass: d_k and the objective at the current g
    let sweep = |g: &[T], d: &mut [T]| -> T {
        d.iter_mut().for_each(|v| *v = T::zero());
        let mut obj = offset;
        for c in 0..n {
            let l = lik.cell(c);
            let f: T = l.iter().zip(g).map(|(&a, &b)| a * b).sum();
            obj += f.ln();
            let inv = f.recip();
            for (dk, &lk) in d.iter_mut().zip(l) {
                *dk += lk * inv;
            }
        }
        d.iter_mut().for_each(|v| *v *= inv_n);
        obj
    };

    let em_step = |g: &[T], d: &[T]| -> Vec<T> {
        let mut next: Vec<T> = g.iter().zip(d).map(|(&a, &b)| a * b).collect();
        let s: T = next.iter().copied().sum();
        next.iter_mut().for_each(|v| *v /= s);
        next
    };

    let mut trace = Vec::new();
    let mut obj = sweep(&g, &mut d);
    trace.push(obj);
    let mut iterations = 0;
    let mut objective_settled = false;
    let mut converged = false;
    let mut polishing = false;
    let (mut d1, mut d2, mut d3) = (vec![T::zero(); k], vec![T::zero(); k], vec![T::zero(); k]);
    loop {
        let kkt = d.iter().copied().fold(T::neg_infinity(), T::max);
        if objective_settled && kkt <= T::one() + opts.kkt_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        if polishing {
            let Some(next) = newton_step(&lik, &g, obj) else {
                // no ascent direction left: the objective has settled
                converged = kkt <= T::one() + opts.kkt_tol;
                break;
            };
            g = next;
            let next = sweep(&g, &mut d);
            iterations += 1;
            objective_settled = (next - obj).abs() <= opts.tol * obj.abs();
            obj = next;
            trace.push(obj);
            continue;
        }
        // two EM steps, then a squared extrapolation kept only if it beats them
        let g1 = em_step(&g, &d);
        sweep(&g1, &mut d1);
        let g2 = em_step(&g1, &d1);
        let obj2 = sweep(&g2, &mut d2);
        let r: Vec<T> = g1.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let v: Vec<T> = g2.iter().zip(&g1).zip(&r).map(|((&a, &b), &c)| a - b - c).collect();
        let rn = r.iter().map(|&x| x * x).sum::<T>().sqrt();
        let vn = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        let mut accepted = false;
        let mut next = obj2;
        if vn > T::zero() && rn > T::zero() {
            let mut a = (-rn / vn).min(-T::one());
            for _ in 0..30 {
                let cand: Vec<T> = (0..k).map(|i| g[i] - T::lit(2.0) * a * r[i] + a * a * v[i]).collect();
                if cand.iter().all(|&x| x > T::zero()) {
                    let s: T = cand.iter().copied().sum();
                    let cand: Vec<T> = cand.into_iter().map(|x| x / s).collect();
                    sweep(&cand, &mut d3);
                    let g3 = em_step(&cand, &d3);
                    let obj3 = sweep(&g3, &mut d3);
                    if obj3 >= obj2 {
                        g = g3;
                        std::mem::swap(&mut d, &mut d3);
                        accepted = true;
                        next = obj3;
                    }
                    break;
                }
                a = (a - T::one()) / T::lit(2.0);
            }
        }
        if !accepted {
            g = g2;
            std::mem::swap(&mut d, &mut d2);
        }
        iterations += 1;
        objective_settled = (next - obj).abs() <= opts.tol * obj.abs();
        // EM is slow near the boundary of the simplex; finish with Newton steps
        polishing = (next - obj).abs() <= T::lit(POLISH_SWITCH).max(opts.tol) * obj.abs();
        obj = next;
        trace.push(obj);
    }
    let kkt = d.iter().copied().fold(T::neg_infinity(), T::max);
    let k_star = g.iter().filter(|&&v| v > T::lit(EMPTY_MASS)).count();
    Ok(FitResult {
        model: ModelKind::Km,
        prior: PriorModel::Discrete(DiscretePrior { support: support.to_vec(), masses: g }),
        log_marginal_likelihood: obj,
        objective_trace: trace,
        segment_starts: vec![0],
        k_star,
        alpha: None,
        converged,
        iterations,
        seed: None,
        diagnostics: Diagnostics { kkt_max: Some(kkt), ..Diagnostics::default() },
    })
}

fn newton_step<T: Real>(lik: &Likelihood<T>, g: &[T], obj: T) -> Option<Vec<T>> {
    let (n, k) = (lik.n_cells, lik.k);
    let gf: Vec<f64> = g.iter().map(|v| v.as_f64()).collect();
    // the last row enforces Σ w ≈ 1 with a heavy weight
    let rho = 1e3 * (n as f64).sqrt();
    let mut s = DMatrix::<f64>::zeros(n + 1, k);
    for c in 0..n {
        let l = lik.cell(c);
        let f: f64 = l.iter().zip(&gf).map(|(a, b)| a.as_f64() * b).sum();
        for (j, &lj) in l.iter().enumerate() {
            s[(c, j)] = lj.as_f64() / f;
        }
    }
    let grad: Vec<f64> = (0..k).map(|j| s.column(j).rows(0, n).sum()).collect();
    s.row_mut(n).fill(rho);
    let mut rhs = DVector::from_element(n + 1, 2.0);
    rhs[n] = rho;
    let w = nnls(&s, &rhs);
    let total = w.sum();
    if !(total > 0.0) {
        return None;
    }
    let dir: Vec<f64> = (0..k).map(|j| w[j] / total - gf[j]).collect();
    let slope: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
    if !(slope > 0.0) {
        return None;
    }
    let mut t = 1.0;
    for _ in 0..50 {
        let mut cand: Vec<T> = (0..k).map(|j| T::lit((gf[j] + t * dir[j]).max(0.0))).collect();
        let sum: T = cand.iter().copied().sum();
        cand.iter_mut().for_each(|v| *v /= sum);
        let val = lik.log_likelihood(&cand);
        if val.as_f64() >= obj.as_f64() + t * slope / 3.0 || (val > obj && t < 1e-6) {
            return Some(cand);
        }
        t *= 0.5;
    }
    None
}
