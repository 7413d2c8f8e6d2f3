use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{natural_spline_basis, softmax_masses, EfronPrior, Likelihood};
use crate::error::{Error, Result};
use crate::fit::{Diagnostics, FitResult, ModelKind, PriorModel};
use crate::num::Real;
use crate::optim::{bfgs, BfgsOptions};
use crate::tables::{ContingencyTable, ExpectedCounts};

/// Smoothing added under the square root of the group penalty.
const PENALTY_SMOOTHING: f64 = 1e-12;

/// Optimizer settings for [`efron_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EfronOptions<T> {
    pub gtol: T,
    pub ftol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for EfronOptions<T> {
    fn default() -> Self {
        let b = BfgsOptions::<T>::default();
        Self { gtol: b.gtol, ftol: b.ftol, max_iter: b.max_iter }
    }
}

/// AIC with effective degrees of freedom `trace(F)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfronAic<T> {
    pub trace_f: T,
    pub aic: T,
}

/// Penalized marginal likelihood in the spline coefficients.
pub(crate) struct Problem<'a, T> {
    pub lik: &'a Likelihood<T>,
    pub basis: &'a [Vec<T>],
    pub c0: T,
}

pub(crate) struct Eval<T> {
    /// Unpenalized log likelihood.
    pub log_lik: T,
    pub penalized: T,
    /// Gradient of the penalized objective.
    pub gradient: Vec<T>,
}

impl<T: Real> Problem<'_, T> {
    fn p(&self) -> usize {
        self.basis[0].len()
    }

    fn smoothed_norm(&self, alpha: &[T]) -> T {
        (alpha.iter().map(|&a| a * a).sum::<T>() + T::lit(PENALTY_SMOOTHING)).sqrt()
    }

    /// `Qᵀ v`.
    fn qt(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.p()];
        for (row, &vk) in self.basis.iter().zip(v) {
            for (o, &q) in out.iter_mut().zip(row) {
                *o += q * vk;
            }
        }
        out
    }

    /// Per-cell posterior weights `w_ck = L_ck g_k / f_c` (cell-major), and `ln f_c` summed.
    fn posterior_weights(&self, g: &[T]) -> (Vec<T>, T) {
        let k = self.lik.k;
        let mut w = vec![T::zero(); self.lik.n_cells * k];
        let mut ll = T::zero();
        for c in 0..self.lik.n_cells {
            let l = self.lik.cell(c);
            let row = &mut w[c * k..(c + 1) * k];
            let mut f = T::zero();
            for ((wk, &lk), &gk) in row.iter_mut().zip(l).zip(g) {
                *wk = lk * gk;
                f += *wk;
            }
            let inv = f.recip();
            row.iter_mut().for_each(|v| *v *= inv);
            ll += f.ln() + self.lik.offset[c];
        }
        (w, ll)
    }

    pub fn eval(&self, alpha: &[T]) -> Eval<T> {
        let (g, _) = softmax_masses(self.basis, alpha);
        let (w, log_lik) = self.posterior_weights(&g);
        let k = self.lik.k;
        let n = T::from_usize(self.lik.n_cells).unwrap();
        let mut resid: Vec<T> = g.iter().map(|&gk| -n * gk).collect();
        for c in 0..self.lik.n_cells {
            for (r, &wk) in resid.iter_mut().zip(&w[c * k..(c + 1) * k]) {
                *r += wk;
            }
        }
        let mut gradient = self.qt(&resid);
        let s = self.smoothed_norm(alpha);
        for (gr, &a) in gradient.iter_mut().zip(alpha) {
            *gr -= self.c0 * a / s;
        }
        Eval { log_lik, penalized: log_lik - self.c0 * s, gradient }
    }

    /// Hessians of the unpenalized log likelihood and of the penalty term, in `f64`.
    pub fn hessians(&self, alpha: &[T]) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = self.p();
        let k = self.lik.k;
        let n = self.lik.n_cells as f64;
        let (g, _) = softmax_masses(self.basis, alpha);
        let (w, _) = self.posterior_weights(&g);
        let q = DMatrix::from_fn(k, p, |i, j| self.basis[i][j].as_f64());
        let mut diag = vec![0.0; k];
        for (d, &gk) in diag.iter_mut().zip(&g) {
            *d = -n * gk.as_f64();
        }
        // Σ_c b_c b_cᵀ with b_c = Qᵀ w_c
        let mut outer = DMatrix::<f64>::zeros(p, p);
        let mut b = DMatrix::<f64>::zeros(p, self.lik.n_cells);
        for c in 0..self.lik.n_cells {
            let wc = &w[c * k..(c + 1) * k];
            for (d, &v) in diag.iter_mut().zip(wc) {
                *d += v.as_f64();
            }
            let bc = self.qt(wc);
            for (j, v) in bc.iter().enumerate() {
                b[(j, c)] = v.as_f64();
            }
        }
        outer.gemm(1.0, &b, &b.transpose(), 0.0);
        let qg = q.tr_mul(&nalgebra::DVector::from_iterator(k, g.iter().map(|v| v.as_f64())));
        let mut scaled = q.clone();
        for i in 0..k {
            for j in 0..p {
                scaled[(i, j)] *= diag[i];
            }
        }
        let h0 = q.tr_mul(&scaled) - outer + (&qg * qg.transpose()) * n;

        let a = nalgebra::DVector::from_iterator(p, alpha.iter().map(|v| v.as_f64()));
        let s = (a.norm_squared() + PENALTY_SMOOTHING).sqrt();
        let c0 = self.c0.as_f64();
        let hpen = (DMatrix::identity(p, p) / s - (&a * a.transpose()) / (s * s * s)) * -c0;
        (h0, hpen)
    }
}

fn support_basis<T: Real>(support: &[T], p: usize) -> Result<Vec<Vec<T>>> {
    let log_support: Vec<T> = support
        .iter()
        .map(|&v| {
            if v > T::zero() {
                Ok(v.ln())
            } else {
                Err(Error::InvalidArgument("efron support must be strictly positive".into()))
            }
        })
        .collect::<Result<_>>()?;
    natural_spline_basis(&log_support, p)
}

/// Penalized log likelihood and its analytic gradient at coefficients `alpha`,
/// using the same basis as [`efron_fit`].
pub fn efron_objective<T: Real>(
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    support: &[T],
    p: usize,
    c0: T,
    alpha: &[T],
) -> Result<(T, Vec<T>)> {
    if alpha.len() != p {
        return Err(Error::InvalidArgument(format!("alpha has {} entries, expected {p}", alpha.len())));
    }
    let lik = Likelihood::new(table, e, support)?;
    let basis = support_basis(support, p)?;
    let ev = Problem { lik: &lik, basis: &basis, c0 }.eval(alpha);
    Ok((ev.penalized, ev.gradient))
}

/// Efron's penalized exponential-family prior on `support` with a `p`-column
/// natural spline basis and group penalty `c0 · ‖α‖`.
///
/// The optimizer starts from `α = 0` (the uniform prior). When it converges the
/// AIC diagnostics are attached; a singular penalized Hessian leaves them empty.
pub fn efron_fit<T: Real>(
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    p: usize,
    c0: T,
    support: &[T],
    opts: &EfronOptions<T>,
) -> Result<FitResult<T>> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("efron needs p >= 2, got {p}")));
    }
    if !(c0 >= T::zero() && c0.is_finite()) {
        return Err(Error::InvalidArgument(format!("c0 must be finite and non-negative, got {c0}")));
    }
    if support.len() <= p {
        return Err(Error::InvalidArgument(format!(
            "support has {} points; efron needs more than p = {p}",
            support.len()
        )));
    }
    let lik = Likelihood::new(table, e, support)?;
    let basis = support_basis(support, p)?;
    let problem = Problem { lik: &lik, basis: &basis, c0 };
    let bopts = BfgsOptions { gtol: opts.gtol, ftol: opts.ftol, max_iter: opts.max_iter };
    let result = bfgs(
        |a| {
            let ev = problem.eval(a);
            (-ev.penalized, ev.gradient.iter().map(|&g| -g).collect())
        },
        vec![T::zero(); p],
        &bopts,
    );
    let alpha = result.x;
    let ev = problem.eval(&alpha);
    let (_, log_normalizer) = softmax_masses(&basis, &alpha);
    let prior = EfronPrior { support: support.to_vec(), basis: basis.clone(), coefficients: alpha, c0, log_normalizer };
    let mut fit = FitResult {
        model: ModelKind::Efron,
        k_star: support.len(),
        prior: PriorModel::Efron(prior),
        log_marginal_likelihood: ev.log_lik,
        objective_trace: result.trace.iter().map(|&v| -v).collect(),
        segment_starts: vec![0],
        alpha: None,
        converged: result.converged,
        iterations: result.iterations,
        seed: None,
        diagnostics: Diagnostics { penalized_log_likelihood: Some(ev.penalized), ..Diagnostics::default() },
    };
    if fit.converged {
        if let Ok(a) = aic_from(&problem, &fit) {
            fit.diagnostics.trace_f = Some(a.trace_f);
            fit.diagnostics.aic_e = Some(a.aic);
        }
    }
    Ok(fit)
}

/// `AIC_E = 2 trace(F) − 2 ln L_0(α̂)` with `F = H_{c0}⁻¹ H_0`.
pub fn efron_aic<T: Real>(fit: &FitResult<T>, table: &ContingencyTable, e: &ExpectedCounts<T>) -> Result<EfronAic<T>> {
    let PriorModel::Efron(prior) = &fit.prior else {
        return Err(Error::InvalidArgument("AIC_E needs an efron fit".into()));
    };
    if !fit.converged {
        return Err(Error::InvalidArgument("AIC_E needs a converged efron fit".into()));
    }
    let lik = Likelihood::new(table, e, &prior.support)?;
    let problem = Problem { lik: &lik, basis: &prior.basis, c0: prior.c0 };
    aic_from(&problem, fit)
}

fn aic_from<T: Real>(problem: &Problem<'_, T>, fit: &FitResult<T>) -> Result<EfronAic<T>> {
    let PriorModel::Efron(prior) = &fit.prior else {
        unreachable!("caller checked the prior kind");
    };
    let alpha = &prior.coefficients;
    let p = alpha.len();
    let log_lik = problem.eval(alpha).log_lik;
    let trace_f = if problem.c0 == T::zero() {
        T::from_usize(p).unwrap()
    } else {
        let (h0, hpen) = problem.hessians(alpha);
        let neg_hc = -(&h0 + hpen);
        let sym = (&neg_hc + neg_hc.transpose()) * 0.5;
        let chol = sym.cholesky().ok_or(Error::SingularHessian)?;
        let f = chol.solve(&(-h0));
        T::lit(f.trace())
    };
    Ok(EfronAic { trace_f, aic: T::lit(2.0) * trace_f - T::lit(2.0) * log_lik })
}
