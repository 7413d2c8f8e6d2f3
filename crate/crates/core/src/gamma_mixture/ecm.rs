//! Bi-level ECM for gamma-mixture priors with Dirichlet(α) weight shrinkage.
//!
//! One E step feeds two conditional maximizations:
//!
//! * CM-1 updates weights and shapes from the Poisson–logarithmic augmentation,
//!   where `δ = E[M | N, S = k] = r (ψ(r + N) − ψ(r))`;
//! * CM-2 solves the scale stationarity equation by a monotone fixed point.
//!
//! Components whose Dirichlet-adjusted responsibility `n_k + α − 1` is not
//! positive are pruned. A prune changes the objective being maximized, so it
//! starts a new trace segment and the E step is redone before the next CM pass;
//! within a segment the penalized objective never decreases.

use serde::{Deserialize, Serialize};

use super::{default_components, init_prior, GammaMixturePrior};
use crate::error::{Error, Result};
use crate::fit::{Diagnostics, FitResult, ModelKind, PriorModel};
use crate::num::Real;
use crate::special::{digamma_diff, ln_factorial, ln_gamma_ratio};
use crate::tables::{ContingencyTable, ExpectedCounts};

const SHAPE_FLOOR: f64 = 1e-8;
const SCALE_FLOOR: f64 = 1e-12;
const INNER_MAX_ITER: usize = 50;
const INNER_TOL: f64 = 1e-10;

/// Settings for [`ecm_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EcmOptions<T> {
    /// Dirichlet hyperparameter in `[0, 1]`; 1 means no shrinkage.
    pub alpha: T,
    /// Starting component count; `None` means `min(200, I·J)`.
    pub n_components: Option<usize>,
    /// Initial component variance for the mean-variance start.
    pub eps: T,
    /// Relative objective change that declares convergence.
    pub tol: T,
    pub max_iter: usize,
    pub seed: u64,
    /// Drop components whose weight update is not positive.
    pub prune: bool,
    /// Start from this prior instead of the seeded mean-variance grid.
    #[serde(skip)]
    pub initial: Option<GammaMixturePrior<T>>,
}

impl<T: Real> Default for EcmOptions<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(0.5),
            n_components: None,
            eps: T::lit(1e-6),
            tol: T::lit(1e-8),
            max_iter: 5000,
            seed: 1,
            prune: true,
            initial: None,
        }
    }
}

/// Per-cell data and unique-count lookup so `ln Γ` / `ψ` terms are shared across cells.
struct Cells<T> {
    n: Vec<u64>,
    n_real: Vec<T>,
    e: Vec<T>,
    ln_e: Vec<T>,
    ln_fact: Vec<T>,
    uniq: Vec<u64>,
    uidx: Vec<usize>,
}

impl<T: Real> Cells<T> {
    fn new(table: &ContingencyTable, e: &ExpectedCounts<T>) -> Self {
        let n: Vec<u64> = table.counts().to_vec();
        let mut uniq = n.clone();
        uniq.sort_unstable();
        uniq.dedup();
        let uidx = n.iter().map(|v| uniq.binary_search(v).unwrap()).collect();
        Self {
            n_real: n.iter().map(|&v| T::from_count(v)).collect(),
            ln_fact: n.iter().map(|&v| ln_factorial(v)).collect(),
            e: e.values().to_vec(),
            ln_e: e.values().iter().map(|v| v.ln()).collect(),
            n,
            uniq,
            uidx,
        }
    }

    fn len(&self) -> usize {
        self.n.len()
    }
}

/// Mutable state of the fitter over the retained components.
struct State<T> {
    w: Vec<T>,
    r: Vec<T>,
    h: Vec<T>,
    /// Responsibilities, cell-major: `tau[c * K + k]`.
    tau: Vec<T>,
    /// `−ln θ_ck = ln(1 + E_c h_k)`, same layout.
    neg_ln_theta: Vec<T>,
    n_k: Vec<T>,
}

impl<T: Real> State<T> {
    fn k(&self) -> usize {
        self.w.len()
    }

    /// E step. Returns the log marginal likelihood at the current parameters.
    fn e_step(&mut self, cells: &Cells<T>, n_cols: usize) -> Result<T> {
        let k_len = self.k();
        let nc = cells.len();
        self.tau.resize(nc * k_len, T::zero());
        self.neg_ln_theta.resize(nc * k_len, T::zero());
        // ln Γ(N + r) − ln Γ(r) per (component, unique count)
        let nu = cells.uniq.len();
        let mut lg = vec![T::zero(); k_len * nu];
        for k in 0..k_len {
            for (u, &n) in cells.uniq.iter().enumerate() {
                lg[k * nu + u] = ln_gamma_ratio(self.r[k], n);
            }
        }
        let ln_w: Vec<T> = self.w.iter().map(|w| w.ln()).collect();
        let ln_h: Vec<T> = self.h.iter().map(|h| h.ln()).collect();
        let mut total = T::zero();
        self.n_k.clear();
        self.n_k.resize(k_len, T::zero());
        for c in 0..nc {
            let (n, e, ln_e) = (cells.n_real[c], cells.e[c], cells.ln_e[c]);
            let u = cells.uidx[c];
            let row = c * k_len;
            let mut max = T::neg_infinity();
            for k in 0..k_len {
                let l1p = (e * self.h[k]).ln_1p();
                self.neg_ln_theta[row + k] = l1p;
                let mut lp = ln_w[k] + lg[k * nu + u] - cells.ln_fact[c] - self.r[k] * l1p;
                if cells.n[c] > 0 {
                    lp += n * (ln_e + ln_h[k] - l1p);
                }
                self.tau[row + k] = lp;
                if lp > max {
                    max = lp;
                }
            }
            if !max.is_finite() {
                let bad = (0..k_len).find(|&k| !self.tau[row + k].is_finite()).unwrap_or(0);
                return Err(Error::NonFinite { row: c / n_cols, col: c % n_cols, component: bad });
            }
            let mut s = T::zero();
            for k in 0..k_len {
                let v = (self.tau[row + k] - max).exp();
                self.tau[row + k] = v;
                s += v;
            }
            let inv = s.recip();
            for k in 0..k_len {
                let t = self.tau[row + k] * inv;
                self.tau[row + k] = t;
                self.n_k[k] += t;
            }
            total += max + s.ln();
        }
        Ok(total)
    }

    fn penalty(&self, alpha: T) -> T {
        if alpha == T::one() {
            return T::zero();
        }
        (alpha - T::one()) * self.w.iter().map(|w| w.ln()).sum::<T>()
    }

    fn retain(&mut self, keep: &[bool]) {
        let filter = |v: &mut Vec<T>| {
            let mut it = keep.iter();
            v.retain(|_| *it.next().unwrap());
        };
        filter(&mut self.w);
        filter(&mut self.r);
        filter(&mut self.h);
        let s: T = self.w.iter().copied().sum();
        for w in &mut self.w {
            *w /= s;
        }
    }

    /// CM-1 (weights and shapes) then CM-2 (scales).
    fn cm_steps(&mut self, cells: &Cells<T>, alpha: T, prune: bool) {
        let k_len = self.k();
        let nc = cells.len();
        // weights
        let tiny = T::min_positive_value().sqrt();
        let adj: Vec<T> = self
            .n_k
            .iter()
            .map(|&n| {
                let a = n + alpha - T::one();
                if prune {
                    a
                } else {
                    a.max(tiny)
                }
            })
            .collect();
        let s: T = adj.iter().copied().sum();
        for k in 0..k_len {
            self.w[k] = adj[k] / s;
        }
        // shapes: δ = r (ψ(r + N) − ψ(r)), with θ at the current scales
        let nu = cells.uniq.len();
        let shape_floor = T::lit(SHAPE_FLOOR);
        for k in 0..k_len {
            let r = self.r[k];
            let dg: Vec<T> = cells.uniq.iter().map(|&n| digamma_diff(r, n)).collect();
            let (mut num, mut den) = (T::zero(), T::zero());
            for c in 0..nc {
                let t = self.tau[c * k_len + k];
                num += t * dg[cells.uidx[c]];
                den += t * self.neg_ln_theta[c * k_len + k];
            }
            debug_assert_eq!(dg.len(), nu);
            let updated = r * num / den;
            self.r[k] = if updated.is_finite() { updated.max(shape_floor) } else { r };
        }
        // scales: Σ τ [N/h − E(N + r)/(1 + E h)] = 0
        let scale_floor = T::lit(SCALE_FLOOR);
        let inner_tol = T::lit(INNER_TOL);
        for k in 0..k_len {
            let r = self.r[k];
            let a: T = (0..nc).map(|c| self.tau[c * k_len + k] * cells.n_real[c]).sum();
            if !(a > T::zero()) {
                self.h[k] = scale_floor;
                continue;
            }
            let mut h = self.h[k];
            for _ in 0..INNER_MAX_ITER {
                let b: T = (0..nc)
                    .map(|c| {
                        let e = cells.e[c];
                        self.tau[c * k_len + k] * e * (cells.n_real[c] + r) / (T::one() + e * h)
                    })
                    .sum();
                let next = (a / b).max(scale_floor);
                let done = (next - h).abs() <= inner_tol * h;
                h = next;
                if done {
                    break;
                }
            }
            self.h[k] = h;
        }
    }
}

/// Fit a gamma-mixture prior by the bi-level ECM.
///
/// Non-convergence within `max_iter` is reported through `converged = false`.
pub fn ecm_fit<T: Real>(
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    model: ModelKind,
    opts: &EcmOptions<T>,
) -> Result<FitResult<T>> {
    e.check_shape(table)?;
    let alpha = opts.alpha;
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if table.grand_total() == 0 {
        return Err(Error::InvalidTable("all counts are zero; nothing to fit".into()));
    }
    let init = match &opts.initial {
        Some(p) => {
            p.validate()?;
            p.clone()
        }
        None => {
            let k = opts.n_components.unwrap_or_else(|| default_components(table));
            init_prior(table, e, k, opts.eps, opts.seed)?
        }
    };
    let cells = Cells::new(table, e);
    let n_cols = table.n_cols();
    let mut st = State {
        w: init.weights,
        r: init.shapes,
        h: init.scales,
        tau: Vec::new(),
        neg_ln_theta: Vec::new(),
        n_k: Vec::new(),
    };

    let mut trace: Vec<T> = Vec::new();
    let mut segment_starts = vec![0usize];
    let mut iterations = 0;
    let mut converged = false;
    let mut log_lik;
    loop {
        log_lik = st.e_step(&cells, n_cols)?;
        let objective = log_lik + st.penalty(alpha);
        trace.push(objective);
        let seg_start = *segment_starts.last().unwrap();
        if trace.len() - 1 > seg_start {
            let prev = trace[trace.len() - 2];
            if (objective - prev).abs() <= opts.tol * prev.abs() {
                converged = true;
                break;
            }
        }
        if iterations >= opts.max_iter {
            break;
        }
        if opts.prune {
            let keep: Vec<bool> = st.n_k.iter().map(|&n| n + alpha - T::one() > T::zero()).collect();
            if keep.iter().any(|k| !k) {
                let mut keep = keep;
                if keep.iter().all(|k| !k) {
                    let best = (0..st.k()).max_by(|&a, &b| st.n_k[a].partial_cmp(&st.n_k[b]).unwrap()).unwrap();
                    keep[best] = true;
                }
                st.retain(&keep);
                segment_starts.push(trace.len());
                continue;
            }
        }
        st.cm_steps(&cells, alpha, opts.prune);
        iterations += 1;
    }

    let k_star = st.k();
    let prior = GammaMixturePrior { weights: st.w, shapes: st.r, scales: st.h };
    Ok(FitResult {
        model,
        prior: PriorModel::GammaMixture(prior),
        log_marginal_likelihood: log_lik,
        objective_trace: trace,
        segment_starts,
        k_star,
        alpha: Some(alpha),
        converged,
        iterations,
        seed: Some(opts.seed),
        diagnostics: Diagnostics::default(),
    })
}

/// GPS: two-component gamma mixture, no shrinkage, no pruning.
pub fn fit_gps<T: Real>(
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> Result<FitResult<T>> {
    let opts = EcmOptions {
        alpha: T::one(),
        n_components: Some(2),
        tol,
        max_iter,
        seed,
        prune: false,
        ..EcmOptions::default()
    };
    ecm_fit(table, e, ModelKind::Gps, &opts)
}

/// K-gamma: fixed `K` components, no shrinkage.
pub fn fit_k_gamma<T: Real>(
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    k: usize,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> Result<FitResult<T>> {
    let opts = EcmOptions {
        alpha: T::one(),
        n_components: Some(k),
        tol,
        max_iter,
        seed,
        prune: false,
        ..EcmOptions::default()
    };
    ecm_fit(table, e, ModelKind::KGamma, &opts)
}

/// General-gamma: overfitted start with Dirichlet(α) shrinkage and pruning.
pub fn fit_general_gamma<T: Real>(
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    opts: &EcmOptions<T>,
) -> Result<FitResult<T>> {
    ecm_fit(table, e, ModelKind::GeneralGamma, opts)
}
